//! 8-connected component analysis on binary masks.

use crate::raster::BinaryMask;

pub const DEFAULT_MIN_COMPONENT: usize = 100;

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Labels 8-connected foreground components. Returns the per-pixel label
/// (0 = background, components numbered from 1 in raster order) and the
/// area of each component, indexed by `label - 1`.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let fg = mask.labels();
    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        let id = areas.len() as u32 + 1;
        labels[start] = id;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if fg[j] && labels[j] == 0 {
                    labels[j] = id;
                    stack.push(j);
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// Relabels every foreground component smaller than `min_size` pixels as
/// background.
pub fn remove_small_components(mask: &BinaryMask, min_size: usize) -> BinaryMask {
    let (labels, areas) = label_components(mask);
    let kept = labels
        .iter()
        .map(|&l| l != 0 && areas[l as usize - 1] >= min_size)
        .collect();
    BinaryMask::new(mask.width(), mask.height(), kept).expect("same dimensions as input")
}
