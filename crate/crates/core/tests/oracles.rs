//! Library results checked against direct, unoptimized re-derivations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verity_core::features::{
    extract_features_builtin, fid, inception_score, kid, matrix_sqrt_psd, FeatureMatrix, Kernel, ProbMatrix,
};
use verity_core::nfss::{nfss_evaluate, EntropySource, NfssConfig};
use verity_core::pixel::{ms_ssim, ssim, MsSsimParams, SsimParams};
use verity_core::{GrayImage, ImageBuffer};

fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.random_range(0..=255) as f64).collect()).unwrap()
}

fn random_rgb(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::new(w, h, 3, (0..w * h * 3).map(|_| rng.random()).collect()).unwrap()
}

/// Plain 2-D window SSIM: every valid placement, full weight matrix.
fn ssim_direct(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let (side, sigma) = (11usize, 1.5f64);
    let r = (side / 2) as f64;
    let mut win = vec![0.0; side * side];
    for j in 0..side {
        for i in 0..side {
            let (dx, dy) = (i as f64 - r, j as f64 - r);
            win[j * side + i] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= total);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut acc = 0.0;
    let mut n = 0;
    for oy in 0..=h - side {
        for ox in 0..=w - side {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..side {
                for i in 0..side {
                    let k = (oy + j) * w + ox + i;
                    let g = win[j * side + i];
                    mx += g * x[k];
                    my += g * y[k];
                    xx += g * x[k] * x[k];
                    yy += g * y[k] * y[k];
                    xy += g * x[k] * y[k];
                }
            }
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            n += 1;
        }
    }
    acc / n as f64
}

fn pool2(x: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..h / 2 {
        for x0 in 0..w / 2 {
            let k = 2 * y * w + 2 * x0;
            out.push((x[k] + x[k + 1] + x[k + w] + x[k + w + 1]) / 4.0);
        }
    }
    out
}

#[test]
fn ssim_matches_direct_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_gray(&mut rng, 40, 33);
    let noisy: Vec<f64> = a.data().iter().map(|v| (v + rng.random_range(-30.0..30.0)).clamp(0.0, 255.0)).collect();
    let b = GrayImage::new(40, 33, noisy).unwrap();
    let lib = ssim(&a, &b, &SsimParams::default()).unwrap();
    let direct = ssim_direct(a.data(), b.data(), 40, 33);
    assert!((lib - direct).abs() < 1e-9, "{lib} vs {direct}");
}

#[test]
fn ms_ssim_three_scales_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_gray(&mut rng, 64, 64);
    let smooth: Vec<f64> = (0..64 * 64).map(|i| ((i % 64) as f64 * 3.0 + (i / 64) as f64).min(255.0)).collect();
    let b = GrayImage::new(64, 64, a.data().iter().zip(&smooth).map(|(p, q)| 0.6 * p + 0.4 * q).collect()).unwrap();
    let weights = vec![0.2, 0.3, 0.5];
    let lib = ms_ssim(&a, &b, &MsSsimParams::new(weights.clone()).unwrap(), &SsimParams::default()).unwrap();

    let (mut x, mut y, mut side) = (a.data().to_vec(), b.data().to_vec(), 64);
    let mut direct = 1.0;
    for (j, beta) in weights.iter().enumerate() {
        if j > 0 {
            x = pool2(&x, side, side);
            y = pool2(&y, side, side);
            side /= 2;
        }
        direct *= ssim_direct(&x, &y, side, side).max(1e-6).powf(*beta);
    }
    assert!((lib - direct).abs() < 1e-9, "{lib} vs {direct}");
}

#[test]
fn fid_one_dimensional_closed_form() {
    let real = FeatureMatrix::new(3, 1, vec![0.0, 2.0, 4.0], "r").unwrap();
    let gen = FeatureMatrix::new(3, 1, vec![10.0, 11.0, 12.0], "g").unwrap();
    // means 2 and 11, variances 4 and 1
    let expected = 81.0 + 4.0 + 1.0 - 2.0 * 2.0;
    assert!((fid(&real, &gen).unwrap() - expected).abs() < 1e-8);
}

#[test]
fn fid_two_dimensional_diagonal_closed_form() {
    let cross = |a: f64, b: f64, m: (f64, f64)| {
        let pts = [(a, 0.0), (-a, 0.0), (0.0, b), (0.0, -b)];
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0 + m.0, p.1 + m.1]).collect();
        FeatureMatrix::from_rows(&rows, "x").unwrap()
    };
    // covariance diag(2a²/3, 2b²/3)
    let (a1, b1, a2, b2) = (3.0, 1.5, 1.0, 4.0);
    let sd = |v: f64| (2.0 * v * v / 3.0).sqrt();
    let expected = 2.0f64.powi(2) + 5.0f64.powi(2) + (sd(a1) - sd(a2)).powi(2) + (sd(b1) - sd(b2)).powi(2);
    let got = fid(&cross(a1, b1, (0.0, 0.0)), &cross(a2, b2, (2.0, -5.0))).unwrap();
    assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
}

#[test]
fn kid_linear_kernel_is_mean_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let linear = Kernel::Polynomial {
        alpha: Some(1.0),
        c: 0.0,
        degree: 1,
    };
    for _ in 0..50 {
        let (n, m, d) = (rng.random_range(1..12), rng.random_range(1..12), rng.random_range(1..9));
        let x = FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect(), "x").unwrap();
        let y = FeatureMatrix::new(m, d, (0..m * d).map(|_| rng.random_range(-3.0..3.0)).collect(), "y").unwrap();
        let gap: f64 = (0..d)
            .map(|k| {
                let mx = x.rows().map(|r| r[k]).sum::<f64>() / n as f64;
                let my = y.rows().map(|r| r[k]).sum::<f64>() / m as f64;
                (mx - my).powi(2)
            })
            .sum();
        assert!((kid(&x, &y, &linear, false).unwrap() - gap).abs() < 1e-8);
    }
}

#[test]
fn sqrt_reconstruction_up_to_64() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [1usize, 2, 3, 5, 8, 16, 33, 64] {
        let a = DMatrix::from_fn(n, n + 3, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * a.transpose();
        let r = matrix_sqrt_psd(&m).unwrap();
        let rel = (&r * &r - &m).norm() / m.norm();
        assert!(rel < 1e-8, "n={n} rel={rel}");
    }
}

#[test]
fn inception_score_one_hot() {
    for k in [1usize, 2, 7, 10] {
        let p = ProbMatrix::new(k, k, DMatrix::<f64>::identity(k, k).as_slice().to_vec()).unwrap();
        assert!((inception_score(&p).unwrap() - k as f64).abs() < 1e-6);
    }
}

#[test]
fn builtin_orientation_bins_shift_under_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = 64;
    let img = random_rgb(&mut rng, s, s);
    // clockwise: new(x, y) = old(y, s-1-x)
    let mut rot = Vec::with_capacity(s * s * 3);
    for y in 0..s {
        for x in 0..s {
            rot.extend_from_slice(img.pixel(y, s - 1 - x));
        }
    }
    let rot = ImageBuffer::new(s, s, 3, rot).unwrap();
    let (_, a) = extract_features_builtin(&img).unwrap();
    let (_, b) = extract_features_builtin(&rot).unwrap();
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for cy in 0..4 {
            for cx in 0..4 {
                for bin in 0..8 {
                    let old = la.values[((3 - cx) * 4 + cy) * 8 + bin];
                    let new = lb.values[(cy * 4 + cx) * 8 + (bin + 2) % 8];
                    assert!((old - new).abs() < 1e-9, "cell ({cx},{cy}) bin {bin}: {old} vs {new}");
                }
            }
        }
    }
}

#[test]
fn nfss_composition_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = NfssConfig {
        resize: (64, 64),
        entropy_source: EntropySource::Mean,
        ..NfssConfig::default()
    };
    let a = random_rgb(&mut rng, 50, 70);
    let b = random_rgb(&mut rng, 80, 60);
    let ab = nfss_evaluate(&a, &b, &cfg, &verity_core::features::BuiltinExtractor).unwrap();
    let ba = nfss_evaluate(&b, &a, &cfg, &verity_core::features::BuiltinExtractor).unwrap();
    for (p, q) in [(ab.ssim_ms, ba.ssim_ms), (ab.dp, ba.dp), (ab.hc, ba.hc), (ab.h, ba.h), (ab.nfss, ba.nfss)] {
        assert!((p - q).abs() < 1e-9);
    }
    let by_hand = ab.alpha * ab.ssim_ms + (1.0 - ab.alpha) * ab.dp + 0.1 * ab.hc;
    assert!((ab.nfss - by_hand).abs() < 1e-12);
    let alpha = 1.0 / (1.0 + (-ab.h + (ab.ssim_ms - ab.dp) - ab.hc).exp());
    assert!((ab.alpha - alpha).abs() < 1e-12);
}
