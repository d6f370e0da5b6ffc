use qact::image::write_pgm16;
use qact::{make_block_phantom, make_ct_phantom, make_shepp_logan, Image};

/// (intensity, a, b, x0, y0, phi in degrees) of the modified head phantom.
const TABLE: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

fn rasterize(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let x = (2.0 * c as f64 + 1.0 - n as f64) / n as f64;
            let y = (n as f64 - 2.0 * r as f64 - 1.0) / n as f64;
            let mut v = 0.0;
            for [amp, a, b, x0, y0, phi] in TABLE {
                let (s, co) = phi.to_radians().sin_cos();
                let u = (x - x0) * co + (y - y0) * s;
                let w = -(x - x0) * s + (y - y0) * co;
                if u * u / (a * a) + w * w / (b * b) <= 1.0 {
                    v += amp;
                }
            }
            out[r * n + c] = v.clamp(0.0, 1.0);
        }
    }
    out
}

#[test]
fn shepp_logan_matches_independent_rasterization() {
    for n in [4, 8, 16, 24, 64, 128] {
        let img: Image = make_shepp_logan(n).unwrap();
        for (i, (got, want)) in img.pixels().iter().zip(rasterize(n)).enumerate() {
            assert!((got - want).abs() <= 1e-12, "n={n} pixel {i}: {got} vs {want}");
        }
    }
}

#[test]
fn shepp_logan_is_left_right_symmetric_in_its_outer_ellipses() {
    // The skull and brain ellipses are mirror symmetric; a pixel row near the
    // top, above every asymmetric feature, must be symmetric too.
    let img: Image = make_shepp_logan(64).unwrap();
    let r = 4;
    for c in 0..32 {
        assert_eq!(img.get(r, c), img.get(r, 63 - c));
    }
}

#[test]
fn block_phantom_values() {
    let img: Image = make_block_phantom();
    let mut nonzero: Vec<f64> = img.pixels().iter().copied().filter(|&v| v != 0.0).collect();
    nonzero.sort_by(f64::total_cmp);
    assert_eq!(nonzero, vec![0.2, 0.3, 0.4, 0.8]);
}

#[test]
fn ct_phantom_from_a_pgm_slice() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slice.pgm");
    // 40×40 slice: dark left half, bright right half, a mid-gray square.
    let data: Vec<u16> = (0..40 * 40)
        .map(|i| {
            let (r, c) = (i / 40, i % 40);
            if (10..20).contains(&r) && (10..20).contains(&c) {
                30000
            } else if c < 20 {
                1000
            } else {
                60000
            }
        })
        .collect();
    write_pgm16(&path, 40, 40, &data).unwrap();
    let img: Image = make_ct_phantom(&path, 4).unwrap();
    assert_eq!(img.get(0, 0), 0.0);
    assert_eq!(img.get(0, 3), 1.0);
    let expected = (30000.0 - 1000.0) / (60000.0 - 1000.0);
    assert!((img.get(1, 1) - expected).abs() < 1e-12);
    let (lo, hi) = img.min_max();
    assert_eq!((lo, hi), (0.0, 1.0));
    assert!(make_ct_phantom::<f64>(dir.path().join("missing.pgm"), 4).is_err());
    assert!(make_ct_phantom::<f64>(&path, 41).is_err());
}
