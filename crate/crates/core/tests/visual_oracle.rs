use deliberate::visual::{encode, visual_distance, Frame, DESCRIPTOR_LEN, SIDE};

/// Centres and unit-normalises a 32x32 block of intensities in [0, 1].
fn oracle(block: &[f64]) -> Vec<f64> {
    let mean = block.iter().sum::<f64>() / block.len() as f64;
    let centred: Vec<f64> = block.iter().map(|v| v - mean).collect();
    let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
    centred.into_iter().map(|v| v / norm).collect()
}

fn checkerboard(side: usize, cell: usize, dark: u8, light: u8) -> Vec<u8> {
    (0..side * side).map(|i| if ((i % side) / cell + (i / side) / cell).is_multiple_of(2) { dark } else { light }).collect()
}

#[test]
fn native_resolution_frame_is_centred_and_normalised() {
    let pixels = checkerboard(SIDE, 4, 30, 220);
    let got = encode(&Frame::gray(SIDE, SIDE, pixels.clone()).unwrap()).unwrap();
    let want = oracle(&pixels.iter().map(|&p| f64::from(p) / 255.0).collect::<Vec<_>>());
    assert_eq!(got.values().len(), DESCRIPTOR_LEN);
    for (g, w) in got.values().iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn double_resolution_frame_box_averages() {
    // At exactly twice the size each output sample falls midway between two sources.
    let pixels: Vec<u8> = (0..64 * 64).map(|i| ((i * 37 + (i / 64) * 11) % 251) as u8).collect();
    let mut block = Vec::with_capacity(DESCRIPTOR_LEN);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let at = |dx: usize, dy: usize| f64::from(pixels[(2 * y + dy) * 64 + 2 * x + dx]);
            block.push((at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0 / 255.0);
        }
    }
    let got = encode(&Frame::gray(64, 64, pixels).unwrap()).unwrap();
    for (g, w) in got.values().iter().zip(oracle(&block)) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn inverted_checkerboard_is_maximally_distant() {
    let a = encode(&Frame::gray(SIDE, SIDE, checkerboard(SIDE, 8, 0, 255)).unwrap()).unwrap();
    let b = encode(&Frame::gray(SIDE, SIDE, checkerboard(SIDE, 8, 255, 0)).unwrap()).unwrap();
    assert!((visual_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    assert!(visual_distance(&a, &a).unwrap().abs() < 1e-12);
}

#[test]
fn brightness_and_contrast_shift_is_invisible() {
    let base = checkerboard(SIDE, 2, 40, 120);
    let shifted: Vec<u8> = base.iter().map(|&p| p * 2 + 10).collect();
    let a = encode(&Frame::gray(SIDE, SIDE, base).unwrap()).unwrap();
    let b = encode(&Frame::gray(SIDE, SIDE, shifted).unwrap()).unwrap();
    assert!(visual_distance(&a, &b).unwrap() < 1e-12);
}

#[test]
fn flat_frame_is_degenerate_and_never_triggers() {
    let flat = encode(&Frame::gray(16, 16, vec![90; 256]).unwrap()).unwrap();
    let board = encode(&Frame::gray(SIDE, SIDE, checkerboard(SIDE, 4, 0, 255)).unwrap()).unwrap();
    assert!(flat.is_degenerate());
    assert_eq!(visual_distance(&flat, &board).unwrap(), 0.0);
}

#[test]
fn csv_dump_has_one_value_per_cell() {
    let d = encode(&Frame::gray(SIDE, SIDE, checkerboard(SIDE, 4, 0, 255)).unwrap()).unwrap();
    assert_eq!(d.to_csv().split(',').count(), DESCRIPTOR_LEN);
}
