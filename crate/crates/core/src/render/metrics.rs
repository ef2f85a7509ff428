//! Image fidelity metrics.

use super::image::{ImageBuffer, ImageError};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

fn mean_squared(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    a.check_same_size(b)?;
    let n = a.pixels().len() * 3;
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.channels().zip(b.channels()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / n as f64)
}

/// Root mean squared channel difference on linear values.
pub fn rmse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    Ok(mean_squared(a, b)?.sqrt())
}

/// `20 log10(1 / rmse)` of the two images clamped to `[0, 1]`, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    let e = rmse(&a.clamped(), &b.clamped())?;
    Ok(psnr_from_rmse(e))
}

pub fn psnr_from_rmse(rmse: f64) -> f64 {
    if rmse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (20.0 * (1.0 / rmse).log10()).min(PSNR_CAP_DB)
}

/// Mean absolute channel difference on linear values.
pub fn mean_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    a.check_same_size(b)?;
    let n = a.pixels().len() * 3;
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.channels().zip(b.channels()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant(v: f32) -> ImageBuffer {
        ImageBuffer::from_fn(8, 6, |_, _| [v; 3])
    }

    #[test]
    fn rmse_examples() {
        let a = ImageBuffer::from_fn(8, 6, |x, y| [x as f32 * 0.1, y as f32 * 0.05, 0.3]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = a.map(|c| c + 0.1);
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-6);
        assert!(rmse(&a, &ImageBuffer::new(3, 3)).is_err());
    }

    #[test]
    fn psnr_examples() {
        let a = constant(0.5);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b = constant(0.6);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
        assert!((psnr_from_rmse(0.1) - 20.0).abs() < 1e-12);
        assert!((psnr_from_rmse(0.025) - 32.04).abs() < 5e-3);
        assert!((psnr_from_rmse(0.0098) - 40.17).abs() < 0.2);
        assert!((psnr_from_rmse(0.01) - 40.0).abs() < 1e-12);
        // HDR values above one are clamped before scoring
        assert_eq!(psnr(&constant(3.0), &constant(5.0)).unwrap(), PSNR_CAP_DB);
        assert!(psnr(&a, &ImageBuffer::new(2, 2)).is_err());
    }

    #[test]
    fn l1_examples() {
        let a = constant(0.2);
        assert_eq!(mean_abs_diff(&a, &a).unwrap(), 0.0);
        assert!((mean_abs_diff(&a, &a.map(|c| c + 0.1)).unwrap() - 0.1).abs() < 1e-6);
    }

    fn arb_image() -> impl Strategy<Value = ImageBuffer> {
        proptest::collection::vec(0.0f32..4.0, 4 * 3 * 3)
            .prop_map(|v| ImageBuffer::from_fn(4, 3, |x, y| {
                let i = (y * 4 + x) * 3;
                [v[i], v[i + 1], v[i + 2]]
            }))
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_triangle(a in arb_image(), b in arb_image(), c in arb_image()) {
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            let ac = rmse(&a, &c).unwrap();
            let bc = rmse(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
