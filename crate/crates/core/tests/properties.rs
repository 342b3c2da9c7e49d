//! Property tests for invariants that must hold on arbitrary inputs: the
//! losses' symmetry and scaling laws, metric orderings, normalization
//! monotonicity, and file-format round-trips.

use approx::assert_relative_eq;
use proptest::prelude::*;

use depthsynth::depthproc::histogram_equalize;
use depthsynth::metrics::evaluate;
use depthsynth::objectives::{si_loss, si_loss_pairwise, tv_loss};
use depthsynth::pipeline::{read_pfm, write_pfm};
use depthsynth::Raster;

/// Single-channel raster with values in the losses' working range.
fn raster_strategy() -> impl Strategy<Value = Raster> {
    (2usize..=12, 2usize..=12)
        .prop_flat_map(|(w, h)| {
            prop::collection::vec(-3.0..3.0f64, w * h)
                .prop_map(move |data| Raster::from_vec(w, h, 1, data).unwrap())
        })
}

/// Like [`raster_strategy`] but strictly positive, for metric depth.
fn depth_strategy() -> impl Strategy<Value = (Raster, Raster)> {
    (2usize..=12, 2usize..=12)
        .prop_flat_map(|(w, h)| {
            let positive = prop::collection::vec(0.5..500.0f64, w * h);
            (positive.clone(), positive).prop_map(move |(a, b)| {
                (
                    Raster::from_vec(w, h, 1, a).unwrap(),
                    Raster::from_vec(w, h, 1, b).unwrap(),
                )
            })
        })
}

fn paired_strategy() -> impl Strategy<Value = (Raster, Raster)> {
    (2usize..=12, 2usize..=12).prop_flat_map(|(w, h)| {
        let field = prop::collection::vec(-3.0..3.0f64, w * h);
        (field.clone(), field).prop_map(move |(a, b)| {
            (
                Raster::from_vec(w, h, 1, a).unwrap(),
                Raster::from_vec(w, h, 1, b).unwrap(),
            )
        })
    })
}

proptest! {
    #[test]
    fn losses_vanish_at_the_truth(r in raster_strategy()) {
        let si = si_loss(&r, &r).unwrap();
        prop_assert_eq!(si.value, 0.0);
        prop_assert!(si.grad.samples().iter().all(|&g| g == 0.0));
        let tv = tv_loss(&r, &r, 1).unwrap();
        prop_assert_eq!(tv.value, 0.0);
        prop_assert!(tv.grad.samples().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn pairwise_and_simplified_forms_agree((pred, gt) in paired_strategy()) {
        let simplified = si_loss(&pred, &gt).unwrap().value;
        let pairwise = si_loss_pairwise(&pred, &gt).unwrap();
        prop_assert!((simplified - pairwise).abs() <= 1e-12 * simplified.max(1.0));
    }

    #[test]
    fn losses_ignore_an_additive_constant(
        (pred, gt) in paired_strategy(),
        c in -5.0..5.0f64,
    ) {
        let shifted = pred.map(|v| v + c).unwrap();
        let si_base = si_loss(&pred, &gt).unwrap().value;
        let si_shifted = si_loss(&shifted, &gt).unwrap().value;
        assert_relative_eq!(si_shifted, si_base, max_relative = 1e-11, epsilon = 1e-12);
        let tv_base = tv_loss(&pred, &gt, 1).unwrap().value;
        let tv_shifted = tv_loss(&shifted, &gt, 1).unwrap().value;
        assert_relative_eq!(tv_shifted, tv_base, max_relative = 1e-11, epsilon = 1e-12);
    }

    #[test]
    fn loss_values_scale_quadratically(
        d in raster_strategy(),
        eps in 0.1..4.0f64,
    ) {
        let zero = Raster::filled(d.width(), d.height(), 1, 0.0).unwrap();
        let scaled = d.map(|v| eps * v).unwrap();
        let si = si_loss(&d, &zero).unwrap().value;
        let si_scaled = si_loss(&scaled, &zero).unwrap().value;
        assert_relative_eq!(si_scaled, eps * eps * si, max_relative = 1e-10, epsilon = 1e-12);
        let tv = tv_loss(&d, &zero, 1).unwrap().value;
        let tv_scaled = tv_loss(&scaled, &zero, 1).unwrap().value;
        assert_relative_eq!(tv_scaled, eps * eps * tv, max_relative = 1e-10, epsilon = 1e-12);
    }

    #[test]
    fn removing_the_mean_never_raises_the_log_error((pred, gt) in depth_strategy()) {
        let report = evaluate(&pred, &gt).unwrap();
        prop_assert!(report.rmse_si() <= report.rmse_log() + 1e-12);
        prop_assert!(report.rmse() >= 0.0 && report.absrel() >= 0.0 && report.sqrrel() >= 0.0);
    }

    #[test]
    fn equalization_is_monotone_onto_the_unit_interval(r in raster_strategy()) {
        let out = histogram_equalize(&r).unwrap();
        prop_assert!(out.samples().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let inputs = r.samples();
        let outputs = out.samples();
        for i in 0..inputs.len() {
            for j in 0..inputs.len() {
                if inputs[i] < inputs[j] {
                    prop_assert!(outputs[i] <= outputs[j]);
                }
                if inputs[i] == inputs[j] {
                    prop_assert_eq!(outputs[i], outputs[j]);
                }
            }
        }
    }

    #[test]
    fn pfm_round_trip_is_exact_at_32_bits(r in raster_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pfm");
        write_pfm(&r, &path).unwrap();
        let back = read_pfm(&path).unwrap();
        prop_assert_eq!(back.width(), r.width());
        prop_assert_eq!(back.height(), r.height());
        for (a, b) in r.samples().iter().zip(back.samples()) {
            prop_assert_eq!(((*a as f32) as f64).to_bits(), b.to_bits());
        }
    }
}
