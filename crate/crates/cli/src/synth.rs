use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadcrack_core::save_mask;
use roadcrack_core::synth::{crack_image, plain_image, CrackStyle};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output folder; receives `positive/`, `negative/` and `masks/`.
    pub out: PathBuf,
    /// Images per class.
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    /// Side of the square images.
    #[arg(long, default_value_t = 227)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &SynthArgs) -> anyhow::Result<()> {
    let style = CrackStyle::sized(args.size, args.size);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (pos, neg, masks) = (
        args.out.join("positive"),
        args.out.join("negative"),
        args.out.join("masks"),
    );
    for d in [&pos, &neg, &masks] {
        crate::create_dir(d)?;
    }
    for i in 0..args.count {
        let name = format!("crack_{i:04}.png");
        let img = crack_image(&style, &mut rng);
        img.to_rgb().save_png(pos.join(&name))?;
        save_mask(&img.truth, masks.join(&name))?;
        plain_image(&style, &mut rng)
            .to_rgb()
            .save_png(neg.join(format!("plain_{i:04}.png")))?;
    }
    println!(
        "wrote {} crack and {} plain images to {}",
        args.count,
        args.count,
        args.out.display()
    );
    Ok(())
}
