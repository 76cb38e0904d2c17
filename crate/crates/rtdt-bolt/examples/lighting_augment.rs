//! Lighting-condition data augmentation: every image gains two copies whose
//! mean HSL lightness is rescaled to the mean of the other two histogram
//! sections.
//!
//! Run with: `cargo run --release --example lighting_augment`

use rtdt_bolt::detect::lighting_augment;
use rtdt_bolt::img::{rgb_to_hsl, RgbImage};

fn main() -> rtdt_bolt::Result<()> {
    let dataset: Vec<RgbImage> = [30u8, 60, 90, 140, 200, 235]
        .iter()
        .map(|&v| RgbImage::filled(32, 32, [v, v.saturating_add(10), v]))
        .collect();
    let out = lighting_augment(&dataset)?;
    println!(
        "{} input images -> {} augmented images",
        dataset.len(),
        out.images.len()
    );
    for (i, img) in out.images.iter().enumerate() {
        let mean_l = rgb_to_hsl(img).mean_lightness();
        let role = match i % 3 {
            0 => "original",
            1 => "copy a",
            _ => "copy b",
        };
        println!("  image {:2} ({role:8}): mean lightness {mean_l:.3}", i / 3);
    }
    Ok(())
}
