mod common;

use common::*;
use orbfront::imaging::scaled_dimensions;
use orbfront::{build_pyramid, load_pgm, resize_bilinear, save_pgm, GrayImage};
use proptest::prelude::*;

#[test]
fn pgm_round_trip_full_frame() {
    let img = random_image(640, 480, &mut rng(21));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.pgm");
    save_pgm(&img, &path).unwrap();
    assert_eq!(load_pgm(&path).unwrap(), img);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 15 + 640 * 480);
}

#[test]
fn hd_pyramid_dimensions() {
    let img = GrayImage::filled(1280, 720, 3);
    let pyr = build_pyramid(&img, 1.2).unwrap();
    assert_eq!(pyr.len(), 2);
    assert_eq!(pyr.level(1).dimensions(), (1067, 600));
    assert_eq!(scaled_dimensions(640, 480, 1.2), (534, 400));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_bytes_round_trip(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let img = random_image(w, h, &mut rng(seed));
        prop_assert_eq!(GrayImage::from_pgm_bytes(&img.to_pgm_bytes().unwrap()).unwrap(), img);
    }

    #[test]
    fn resize_of_constant_is_constant(
        w in 1usize..60, h in 1usize..60, v in any::<u8>(), fw in 0.05f64..1.0, fh in 0.05f64..1.0,
    ) {
        let dw = ((w as f64 * fw) as usize).max(1);
        let dh = ((h as f64 * fh) as usize).max(1);
        let out = resize_bilinear(&GrayImage::filled(w, h, v), dw, dh).unwrap();
        prop_assert_eq!(out.dimensions(), (dw, dh));
        prop_assert!(out.data().iter().all(|&p| p == v));
    }

    #[test]
    fn resize_stays_in_source_range(
        w in 2usize..60, h in 2usize..60, seed in any::<u64>(), fw in 0.05f64..1.0, fh in 0.05f64..1.0,
    ) {
        let src = random_image(w, h, &mut rng(seed));
        let (lo, hi) = (*src.data().iter().min().unwrap(), *src.data().iter().max().unwrap());
        let out = resize_bilinear(&src, ((w as f64 * fw) as usize).max(1), ((h as f64 * fh) as usize).max(1)).unwrap();
        prop_assert!(out.data().iter().all(|&p| (lo..=hi).contains(&p)));
    }

    #[test]
    fn pyramid_has_two_shrinking_levels(w in 40usize..400, h in 40usize..400, sf in 1.05f64..2.5) {
        let pyr = build_pyramid(&GrayImage::filled(w, h, 9), sf).unwrap();
        prop_assert_eq!(pyr.len(), 2);
        let (w1, h1) = pyr.level(1).dimensions();
        prop_assert!(w1 <= w && h1 <= h && w1 >= 1 && h1 >= 1);
        prop_assert!((w1 as f64 - w as f64 / sf).abs() <= 1.0);
        prop_assert!((h1 as f64 - h as f64 / sf).abs() <= 1.0);
    }
}
