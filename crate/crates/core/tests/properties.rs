use proptest::prelude::*;
use sdi_core::basis::UncertaintyBox;
use sdi_core::cartography::{extract_regions, sweep, Axis, Embedding, FieldTable, GridSpec, Predicate, SweepConfig, UncertaintyMode};
use sdi_core::indicators::{expectation_within, sym_eig, IndicatorConfig, Selection};
use sdi_core::io::{read_field_csv, write_field_csv};
use sdi_core::pce::{CoefficientSet, PceSpace};
use sdi_core::systems::{GuardStatus, LinearSystem};

fn space_2d() -> PceSpace {
    PceSpace::build(3, 5, UncertaintyBox::from_bounds(&[(0.5, 1.5), (-2.0, 4.0)]).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_reproduces_polynomials(raw in prop::collection::vec(-3.0f64..3.0, 20)) {
        let space = space_2d();
        let cs = CoefficientSet::from_raw(10, 2, raw, 0.0);
        let back = space.project_fn(|p| space.evaluate(&cs, p).unwrap(), 0.0);
        for (a, b) in cs.raw().iter().zip(back.raw()) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn covariance_is_positive_semidefinite(raw in prop::collection::vec(-3.0f64..3.0, 30)) {
        let space = space_2d();
        let cs = CoefficientSet::from_raw(10, 3, raw, 0.0);
        let m = space.moments(&cs).unwrap();
        let eig = sym_eig(&m.covariance, 3).unwrap();
        let scale = 1.0 + m.variance.iter().sum::<f64>();
        prop_assert!(eig[2] >= -1e-12 * scale);
        for j in 0..3 {
            prop_assert!((m.covariance[j * 3 + j] - m.variance[j]).abs() <= 1e-12 * scale);
            prop_assert_eq!(m.mean[j], cs.get(0, j));
        }
    }

    #[test]
    fn variance_ignores_the_mean(raw in prop::collection::vec(-3.0f64..3.0, 20), shift in -10.0f64..10.0) {
        let space = space_2d();
        let cs = CoefficientSet::from_raw(10, 2, raw.clone(), 0.0);
        let mut moved = raw;
        moved[0] += shift;
        moved[1] -= shift;
        let a = space.moments(&cs).unwrap();
        let b = space.moments(&CoefficientSet::from_raw(10, 2, moved, 0.0)).unwrap();
        prop_assert_eq!(a.variance, b.variance);
    }

    #[test]
    fn expectation_is_a_monotone_probability(raw in prop::collection::vec(-0.5f64..0.5, 20), eps in 0.01f64..2.0, seed in any::<u64>()) {
        let space = space_2d();
        let cs = CoefficientSet::from_raw(10, 2, raw, 0.0);
        let e1 = expectation_within(&space, &cs, eps, 200, seed).unwrap();
        let e2 = expectation_within(&space, &cs, 2.0 * eps, 200, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&e1));
        prop_assert!(e2 >= e1);
    }

    #[test]
    fn field_csv_round_trips(values in prop::collection::vec(prop_oneof![Just(f64::NAN), -1e6f64..1e6, Just(1e-300)], 12)) {
        let statuses = [GuardStatus::Ok, GuardStatus::Collision, GuardStatus::Escape, GuardStatus::ForbiddenRegion, GuardStatus::StepLimit, GuardStatus::NonFinite];
        let table = FieldTable {
            nx: 3,
            ny: 2,
            columns: vec!["a".into(), "b".into()],
            u: vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3],
            v: vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
            rows: values.chunks(2).map(|c| c.to_vec()).collect(),
            status: statuses.to_vec(),
        };
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &table, &[]).unwrap();
        let (back, _) = read_field_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.status, table.status);
        for (a, b) in table.rows.iter().flatten().zip(back.rows.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn band_and_threshold_masks_are_disjoint(values in prop::collection::vec(0.0f64..1.0, 16), t in 0.0f64..0.4) {
        let table = FieldTable {
            nx: 4,
            ny: 4,
            columns: vec!["alpha".into()],
            u: vec![0.0; 16],
            v: vec![0.0; 16],
            rows: values.iter().map(|&v| vec![v]).collect(),
            status: vec![GuardStatus::Ok; 16],
        };
        let low = extract_regions(&table, "alpha", Predicate::Below { threshold: t }).unwrap();
        let band = extract_regions(&table, "alpha", Predicate::Band { lo: 0.4, hi: 0.6 }).unwrap();
        prop_assert!(low.mask.iter().zip(&band.mask).all(|(a, b)| !(a & b)));
        let area: usize = low.components.iter().map(|c| c.area).sum();
        prop_assert_eq!(area, low.count());
    }
}

#[test]
fn zero_dynamics_grid_has_zero_alpha() {
    let grid = GridSpec::new(Axis::new("x", -1.0, 1.0, 2), Axis::new("y", -1.0, 1.0, 2), Embedding::Direct);
    let cfg = SweepConfig {
        indicators: IndicatorConfig { degree: 2, n_per_dim: 3, tf: 5.0, ..IndicatorConfig::default() },
        selection: Selection::ALL,
        mode: UncertaintyMode::Parameters { bounds: vec![(0.0, 1.0)] },
        workers: 2,
    };
    let field = sweep(&LinearSystem::new(2, vec![0.0; 4], 1), &grid, &cfg).unwrap();
    let table = field.table();
    assert_eq!(table.rows.len(), 4);
    assert!(table.column("alpha").unwrap().iter().all(|&a| a == 0.0));
    assert!(table.column("expectation").unwrap().iter().all(|&e| e == 1.0));
    assert!(table.status.iter().all(|s| s.is_ok()));
}
