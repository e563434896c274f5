//! Splits an RGB image into luma and chroma, swaps in a new luma plane and
//! converts back.

use le2fusion::imaging::{recombine, rgb_to_ycbcr, ycbcr_to_rgb};
use le2fusion::Image;

fn main() -> le2fusion::Result<()> {
    let (w, h) = (6, 4);
    let bytes: Vec<u8> = (0..w * h).flat_map(|i| [(i * 10) as u8, 128, (255 - i * 9) as u8]).collect();
    let rgb = Image::rgb_bytes(w, h, &bytes)?;

    let ycc = rgb_to_ycbcr(&rgb)?;
    let back = ycbcr_to_rgb(&ycc)?.to_unit();
    let err = back.data().iter().zip(rgb.to_unit().data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip max error: {err:.2e}");

    // brighten the luma only; chroma comes along unchanged
    let y = ycc.channel(0);
    let brighter = Image::from_unit_plane(w, h, y.data().iter().map(|v| (v + 0.2).min(1.0)).collect())?;
    let out = recombine(&brighter, &ycc.channel(1), &ycc.channel(2))?;
    println!("pixel (0,0) before {:?}", (0..3).map(|c| rgb.to_byte().get(0, 0, c)).collect::<Vec<_>>());
    println!("pixel (0,0) after  {:?}", (0..3).map(|c| out.to_byte().get(0, 0, c).round()).collect::<Vec<_>>());
    Ok(())
}
