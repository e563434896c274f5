//! Scores a few simple fusion rules with the five quality metrics.

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::metrics::ImageMetrics;
use le2fusion::Image;

fn combine(a: &Image, b: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Image::from_unit_plane(a.width(), a.height(), data).unwrap()
}

fn main() -> le2fusion::Result<()> {
    let (ir, vi) = scene_pair(4, 48);
    let rules: [(&str, Image); 4] = [
        ("visible", vi.clone()),
        ("average", combine(&ir, &vi, |a, b| 0.5 * (a + b))),
        ("maximum", combine(&ir, &vi, f64::max)),
        ("minimum", combine(&ir, &vi, f64::min)),
    ];
    println!("{:>8} {:>7} {:>6} {:>6} {:>6} {:>6}", "rule", "SD", "EN", "MI", "SCD", "Qabf");
    for (name, f) in &rules {
        let m = ImageMetrics::compute(name, &ir, &vi, f)?;
        println!("{name:>8} {:7.2} {:6.3} {:6.3} {:6.3} {:6.3}", m.sd, m.en, m.mi, m.scd, m.qabf);
    }
    Ok(())
}
