use crate::depth::DepthImage;
use crate::{Error, Result};

/// Composites a synthetic render over a real frame: synthetic pixels with
/// positive depth win, every other pixel comes from the real frame.
pub fn blend(synthetic: &DepthImage, real: &DepthImage) -> Result<DepthImage> {
    if synthetic.width() != real.width() || synthetic.height() != real.height() {
        return Err(Error::domain(format!(
            "cannot blend {}x{} synthetic over {}x{} real",
            synthetic.width(),
            synthetic.height(),
            real.width(),
            real.height()
        )));
    }
    let data = synthetic
        .data()
        .iter()
        .zip(real.data())
        .map(|(&s, &r)| if s > 0.0 { s } else { r })
        .collect();
    DepthImage::new(synthetic.width(), synthetic.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_synthetic_yields_real() {
        let real = DepthImage::from_fn(5, 4, |u, v| (300 + u * 7 + v) as f64).unwrap();
        assert_eq!(blend(&DepthImage::zeros(5, 4), &real).unwrap(), real);
    }

    #[test]
    fn dense_synthetic_yields_synthetic() {
        let syn = DepthImage::from_fn(5, 4, |u, v| (400 + u + 3 * v) as f64 + 0.25).unwrap();
        let real = DepthImage::from_fn(5, 4, |u, _| (u % 2) as f64 * 900.0).unwrap();
        assert_eq!(blend(&syn, &real).unwrap(), syn);
    }

    #[test]
    fn checkerboard_alternates_sources() {
        let syn = DepthImage::from_fn(6, 6, |u, v| if (u + v) % 2 == 0 { 450.0 } else { 0.0 }).unwrap();
        let real = DepthImage::new(6, 6, vec![700.0; 36]).unwrap();
        let out = blend(&syn, &real).unwrap();
        for v in 0..6 {
            for u in 0..6 {
                let expected = if (u + v) % 2 == 0 { 450.0 } else { 700.0 };
                assert_eq!(out.get(u, v), expected);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            blend(&DepthImage::zeros(3, 3), &DepthImage::zeros(3, 4)),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn output_pixels_come_from_one_source(
            pairs in prop::collection::vec((prop_oneof![Just(0.0), 1.0..2000.0f64], 0.0..2000.0f64), 64)
        ) {
            let syn = DepthImage::new(8, 8, pairs.iter().map(|p| p.0).collect()).unwrap();
            let real = DepthImage::new(8, 8, pairs.iter().map(|p| p.1).collect()).unwrap();
            let out = blend(&syn, &real).unwrap();
            for (i, (s, r)) in pairs.iter().enumerate() {
                let o = out.data()[i];
                prop_assert!(o == *s || o == *r);
                prop_assert_eq!(o, if *s > 0.0 { *s } else { *r });
            }
        }
    }
}
