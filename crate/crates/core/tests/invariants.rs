//! Cross-module invariants over the public API.

use std::f64::consts::PI;

use nfsense::bfi::{
    compress, decompress, dequantize_phi, dequantize_psi, feedback_matrix, givens_angles, from_angles,
    phase_normalize, quantize_phi, quantize_psi, svd_decompose, BfiReport, ChannelMatrix,
};
use nfsense::sra::{make_mask, MaskParams};
use nfsense::tcn::{load_model, save_model, TcnConfig, TcnModel};
use nfsense::traffic::{generate_arrivals, SampleTimes, TrafficKind, TrafficModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phi_code_round_trips_within_half_cell(a in 0.0..(2.0 * PI), bits in 3u32..8) {
        let back = dequantize_phi(quantize_phi(a, bits), bits);
        prop_assert!((back - a).abs() <= PI / (1u64 << bits) as f64 + 1e-12);
    }

    #[test]
    fn psi_code_round_trips_within_half_cell(a in 0.0..(PI / 2.0), bits in 1u32..7) {
        let back = dequantize_psi(quantize_psi(a, bits), bits);
        prop_assert!((back - a).abs() <= PI / (1u64 << (bits + 2)) as f64 + 1e-12);
    }

    #[test]
    fn givens_angles_reconstruct_feedback(seed in 0u64..10_000, n_tx in 2usize..5) {
        let h = ChannelMatrix::random(2, n_tx, seed).unwrap();
        let (_, _, v) = svd_decompose(&h);
        let (vn, _) = phase_normalize(&v.steering(n_tx.min(2)));
        let angles = givens_angles(&vn).unwrap();
        prop_assert!(angles.phi.iter().all(|p| (0.0..2.0 * PI).contains(p)));
        prop_assert!(angles.psi.iter().all(|p| (0.0..=PI / 2.0).contains(p)));
        let back = from_angles(&angles).unwrap();
        prop_assert!(back.v.sub(&vn.v).max_abs() < 1e-9);
    }

    #[test]
    fn report_text_round_trips(seed in 0u64..10_000) {
        let h = ChannelMatrix::random(2, 3, seed).unwrap();
        let v = feedback_matrix(&h, None).unwrap();
        let report = compress(&v, 6, 4).unwrap();
        let parsed = BfiReport::from_text(&report.to_text()).unwrap();
        prop_assert_eq!(&report, &parsed);
        let _ = decompress(&parsed).unwrap();
    }

    #[test]
    fn mask_is_seeded_and_sized(n in 1usize..400, frac in 0.0f64..1.0, run in 1.0f64..12.0, seed: u64) {
        let p = MaskParams { fraction: frac, mean_run: run };
        let a = make_mask(n, p, seed).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a, make_mask(n, p, seed).unwrap());
    }

    #[test]
    fn arrivals_are_sorted_and_in_range(seed in 0u64..1000, kind in 0usize..3) {
        let kind = [TrafficKind::UlCsi, TrafficKind::DlCsi, TrafficKind::UlBfi][kind];
        let t = generate_arrivals(&TrafficModel::default_for(kind, seed), 20.0).unwrap();
        prop_assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(t.times.iter().all(|&x| (0.0..20.0).contains(&x)));
        let back = SampleTimes::from_text(&t.to_text()).unwrap();
        prop_assert_eq!(back.times.len(), t.times.len());
    }
}

#[test]
fn model_file_round_trips() {
    let cfg = TcnConfig { n_c: 8, ..TcnConfig::default() };
    let model = TcnModel::new(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tcn");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.config(), model.config());
    assert_eq!(back.params(), model.params());
}

#[test]
fn truncated_model_file_is_rejected() {
    let model = TcnModel::new(TcnConfig { n_c: 4, ..TcnConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tcn");
    save_model(&model, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(load_model(&path).is_err());
}
