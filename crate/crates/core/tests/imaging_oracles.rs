use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use unfold_ipm::imaging::{
    degrade, estimate_noise_std, load_png, psnr, save_png, ssim, ssim_with_grad, DegradationConfig, MetricOptions,
    NoiseLevel,
};
use unfold_ipm::linops::{CirculantOperator, Kernel, KernelSource};
use unfold_ipm::seeding::stream;
use unfold_ipm::Image;

fn noise_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, sigma: f64) -> Image {
    Image::from_fn(c, h, w, |_| sigma * rng.sample::<f64, _>(StandardNormal))
}

fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Image {
    Image::from_fn(c, h, w, |_| rng.random_range(0.0..1.0))
}

/// Windowed SSIM by direct summation over a periodic 11x11 Gaussian window.
fn ssim_direct(x: &Image, y: &Image, border: usize) -> f64 {
    let taps: Vec<f64> = (-5i32..=5).map(|d| (-(d * d) as f64 / (2.0 * 1.5 * 1.5)).exp()).collect();
    let s: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / s).collect();
    let (h, w) = x.spatial_shape();
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    let mut count = 0;
    for c in 0..x.channels() {
        for i in border..h - border {
            for j in border..w - border {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (a, ta) in taps.iter().enumerate() {
                    for (b, tb) in taps.iter().enumerate() {
                        let ii = (i as isize + a as isize - 5).rem_euclid(h as isize) as usize;
                        let jj = (j as isize + b as isize - 5).rem_euclid(w as isize) as usize;
                        let wgt = ta * tb;
                        let (u, v) = (x.data()[[c, ii, jj]], y.data()[[c, ii, jj]]);
                        mx += wgt * u;
                        my += wgt * v;
                        xx += wgt * u * u;
                        yy += wgt * v * v;
                        xy += wgt * u * v;
                    }
                }
                let (sx, sy, sxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
                total += (2.0 * mx * my + c1) * (2.0 * sxy + c2) / ((mx * mx + my * my + c1) * (sx + sy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

#[test]
fn ssim_matches_direct_window_sum() {
    for i in 0..6 {
        let mut rng = stream(1, i);
        let channels = if i % 2 == 0 { 1 } else { 3 };
        let x = random_image(&mut rng, channels, 20, 24);
        let y = random_image(&mut rng, channels, 20, 24);
        for border in [0, 6] {
            let got = ssim(&x, &y, MetricOptions { border }).unwrap();
            assert!((got - ssim_direct(&x, &y, border)).abs() < 1e-12);
        }
    }
}

#[test]
fn ssim_identity_symmetry_and_range() {
    for i in 0..10 {
        let mut rng = stream(2, i);
        let x = random_image(&mut rng, 1, 32, 32);
        let y = random_image(&mut rng, 1, 32, 32);
        assert!((ssim(&x, &x, MetricOptions::FULL).unwrap() - 1.0).abs() < 1e-12);
        let a = ssim(&x, &y, MetricOptions::default()).unwrap();
        let b = ssim(&y, &x, MetricOptions::default()).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&a));
    }
}

#[test]
fn inverted_checkerboard_has_negative_ssim() {
    let x = Image::from_fn(1, 32, 32, |(_, i, j)| ((i + j) % 2) as f64);
    let inv = x.map(|v| 1.0 - v);
    let s = ssim(&inv, &x, MetricOptions::FULL).unwrap();
    assert!(s < 0.0, "{s}");
    assert!((s - ssim_direct(&inv, &x, 0)).abs() < 1e-12);
}

#[test]
fn ssim_gradient_matches_finite_differences() {
    for i in 0..20 {
        let mut rng = stream(3, i);
        let x = random_image(&mut rng, 1, 32, 32);
        let y = random_image(&mut rng, 1, 32, 32);
        let opts = MetricOptions { border: if i % 2 == 0 { 0 } else { 6 } };
        let (_, g) = ssim_with_grad(&x, &y, opts).unwrap();
        let h = 1e-5;
        let mut fd = Image::zeros(1, 32, 32);
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp.as_slice_mut()[k] += h;
            let mut xm = x.clone();
            xm.as_slice_mut()[k] -= h;
            fd.as_slice_mut()[k] = (ssim(&xp, &y, opts).unwrap() - ssim(&xm, &y, opts).unwrap()) / (2.0 * h);
        }
        let rel = g.sub(&fd).norm() / g.norm().max(fd.norm());
        assert!(rel <= 1e-4, "#{i}: {rel}");
    }
}

#[test]
fn psnr_cases() {
    let mut rng = stream(4, 0);
    let x = random_image(&mut rng, 1, 16, 16);
    assert_eq!(psnr(&x, &x, MetricOptions::FULL).unwrap(), f64::INFINITY);
    let zero = Image::zeros(1, 16, 16);
    let off = Image::filled(1, 16, 16, 0.1);
    assert!((psnr(&off, &zero, MetricOptions::FULL).unwrap() - 20.0).abs() < 1e-12);

    let y = random_image(&mut rng, 3, 16, 16);
    let z = random_image(&mut rng, 3, 16, 16);
    let mse: f64 = y.sub(&z).as_slice().iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let want = 10.0 * (1.0 / mse).log10();
    assert!((psnr(&y, &z, MetricOptions::FULL).unwrap() - want).abs() < 1e-12);
    assert!(psnr(&y, &x, MetricOptions::FULL).is_err());
}

#[test]
fn noise_estimate_on_pure_gaussian_noise() {
    for sigma in [0.008, 0.01, 0.03, 0.05] {
        for seed in 0..20 {
            let mut rng = stream(5, seed);
            let y = noise_image(&mut rng, 1, 256, 256, sigma);
            let est = estimate_noise_std(&y).unwrap();
            assert!((est - sigma).abs() <= 0.1 * sigma, "sigma {sigma} seed {seed}: {est}");
        }
    }
}

#[test]
fn noise_estimate_on_ramp_plus_noise() {
    for seed in 0..10 {
        let mut rng = stream(6, seed);
        let sigma = 0.02;
        let ramp = Image::from_fn(1, 256, 256, |(_, i, j)| 0.1 + 0.6 * i as f64 / 255.0 + 0.2 * j as f64 / 255.0);
        let y = ramp.add(&noise_image(&mut rng, 1, 256, 256, sigma));
        let est = estimate_noise_std(&y).unwrap();
        assert!((est - sigma).abs() <= 0.15 * sigma, "{est}");
    }
}

#[test]
fn noise_estimate_trivial_cases() {
    assert_eq!(estimate_noise_std(&Image::filled(3, 9, 7, 0.4)).unwrap(), 0.0);
    assert!(estimate_noise_std(&Image::zeros(1, 1, 1)).is_err());
    let mut rng = stream(7, 0);
    let y = noise_image(&mut rng, 1, 64, 64, 0.03);
    let shifted = y.map(|v| v + 0.37);
    assert!((estimate_noise_std(&y).unwrap() - estimate_noise_std(&shifted).unwrap()).abs() < 1e-12);
}

#[test]
fn degradation_noise_level_matches_configuration() {
    let truth = Image::from_fn(1, 128, 128, |(_, i, j)| 0.5 + 0.3 * ((i as f64) / 9.0).sin() * ((j as f64) / 13.0).cos());
    let cfg = DegradationConfig {
        kernel: KernelSource::Gaussian { std: 1.6, size: 25 },
        sigma: NoiseLevel::Fixed(0.008),
        seed: 3,
        normalize_kernel: true,
    };
    let (y, sigma) = degrade(&truth, &cfg, 0).unwrap();
    assert_eq!(sigma, 0.008);
    let blur = CirculantOperator::new(Kernel::gaussian(1.6, 25).unwrap(), (128, 128)).unwrap();
    let resid = y.sub(&blur.apply(&truth).unwrap());
    let n = resid.len() as f64;
    let mean = resid.sum() / n;
    let std = (resid.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    assert!((std - 0.008).abs() <= 0.05 * 0.008, "{std}");

    let (again, _) = degrade(&truth, &cfg, 0).unwrap();
    assert_eq!(again, y);
}

#[test]
fn noiseless_identity_degradation_returns_truth() {
    let mut rng = stream(8, 0);
    let truth = random_image(&mut rng, 3, 10, 12);
    let cfg = DegradationConfig {
        kernel: KernelSource::Identity,
        sigma: NoiseLevel::Fixed(0.0),
        seed: 0,
        normalize_kernel: true,
    };
    let (y, _) = degrade(&truth, &cfg, 5).unwrap();
    assert!(y.sub(&truth).norm() < 1e-14);
}

#[test]
fn noise_range_draws_are_reproducible() {
    let truth = Image::filled(1, 8, 8, 0.5);
    let cfg = DegradationConfig {
        kernel: KernelSource::Identity,
        sigma: NoiseLevel::Range { lo: 0.01, hi: 0.05 },
        seed: 11,
        normalize_kernel: true,
    };
    let a: Vec<f64> = (0..10).map(|i| degrade(&truth, &cfg, i).unwrap().1).collect();
    let b: Vec<f64> = (0..10).map(|i| degrade(&truth, &cfg, i).unwrap().1).collect();
    assert_eq!(a, b);
    assert!(a.iter().all(|s| (0.01..0.05).contains(s)));
    assert!(a.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn png_round_trip_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = stream(9, 0);
    for channels in [1, 3] {
        let x = Image::from_fn(channels, 9, 11, |_| rng.random_range(-0.2..1.2));
        let path = dir.path().join(format!("x{channels}.png"));
        save_png(&x, &path).unwrap();
        let back: Image = load_png(&path).unwrap();
        let err = back
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(b, a)| (b - a.clamp(0.0, 1.0)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1.0 / 510.0 + 1e-15, "{err}");
    }

    let black = dir.path().join("black.png");
    save_png(&Image::zeros(1, 4, 4), &black).unwrap();
    let b: Image = load_png(&black).unwrap();
    assert!(b.as_slice().iter().all(|&v| v == 0.0));

    let deep = dir.path().join("deep.png");
    let mut enc = png::Encoder::new(std::fs::File::create(&deep).unwrap(), 2, 2);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    enc.write_header().unwrap().write_image_data(&[0u8; 8]).unwrap();
    assert!(load_png::<f64>(&deep).is_err());
    assert!(load_png::<f64>(&dir.path().join("missing.png")).is_err());
}
