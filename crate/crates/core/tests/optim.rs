use proptest::prelude::*;
use snsm::linalg::rng::{gaussian_matrix, rng_from_seed};
use snsm::linalg::{make_frame, FrameKind, Matrix};
use snsm::optim::{state_size_for, Optimizer, OptimizerSpec, ParamClass, ParamSpec, Preset};
use snsm::partition::Partition;
use snsm::subsetnorm::SubsetNormState;
use snsm::subspace::{SubspaceConfig, SubspaceMomentumState};

fn small_spec(p: Preset) -> OptimizerSpec {
    let mut spec = p.spec();
    spec.apply_overrides(&snsm::optim::Overrides {
        rank: matches!(
            p,
            Preset::AdamSNSM | Preset::AdaGradSNSM | Preset::SgdSM | Preset::GaLore
        )
        .then_some(3),
        refresh_gap: matches!(
            p,
            Preset::AdamSNSM | Preset::AdaGradSNSM | Preset::SgdSM | Preset::GaLore
        )
        .then_some(4),
        ..Default::default()
    })
    .unwrap();
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn static_accounting_matches_live_state(
        preset_idx in 0usize..Preset::ALL.len(),
        shapes in prop::collection::vec((1usize..12, 1usize..12, 0usize..4), 1..4),
    ) {
        let preset = Preset::ALL[preset_idx];
        let classes = [ParamClass::Linear, ParamClass::Embedding, ParamClass::Norm, ParamClass::Other];
        let params: Vec<ParamSpec> = shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c, k))| ParamSpec::new(format!("p{i}"), r, c, classes[k]))
            .collect();
        let spec = small_spec(preset);
        let planned = state_size_for(&spec, &params).unwrap();
        let mut opt = Optimizer::new(spec, params.clone()).unwrap();
        let mut rng = rng_from_seed(1);
        let mut xs: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect();
        let gs: Vec<Matrix> = params.iter().map(|p| gaussian_matrix(p.rows, p.cols, &mut rng)).collect();
        opt.step(&mut xs, &gs, 1).unwrap();
        prop_assert_eq!(opt.state_size(), planned.clone());
        let parts: usize = planned.params.iter().map(|p| p.momentum + p.second_moment).sum();
        prop_assert_eq!(parts, planned.total);
    }

    #[test]
    fn subspace_update_leaves_complement_untouched(seed in 0u64..5000, k in 1usize..6) {
        let (m, n) = (10, 4);
        let mut rng = rng_from_seed(seed);
        let reference = gaussian_matrix(m, n, &mut rng);
        let frame = make_frame(FrameKind::GaussianOrtho, m, k, seed, Some(&reference)).unwrap();
        let proj = frame.projector();
        let mut state = SubspaceMomentumState::with_frame(SubspaceConfig::new(FrameKind::GaussianOrtho, k, 0, 0.8), frame, n).unwrap();
        for t in 1..=5 {
            let g = gaussian_matrix(m, n, &mut rng);
            let dir = state.step(&g, t).unwrap();
            // The complement of U sees the raw gradient, as in plain SGD.
            let resid_dir = dir.sub(&proj.matmul(&dir).unwrap()).unwrap();
            let resid_g = g.sub(&proj.matmul(&g).unwrap()).unwrap();
            let gap = resid_dir.sub(&resid_g).unwrap().max_abs();
            prop_assert!(gap <= 1e-12 * g.max_abs().max(1.0));
        }
    }

    #[test]
    fn cumulative_denominators_never_shrink(
        seed in 0u64..5000,
        block in prop::sample::select(vec![1usize, 2, 3, 6]),
    ) {
        let d = 12;
        let mut state = SubsetNormState::cumulative(Partition::equipartition(d, block).unwrap(), 1e-6).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut prev = state.denominators(0.0).unwrap();
        for _ in 0..10 {
            let g = gaussian_matrix(d, 1, &mut rng);
            state.accumulate_gradient(g.as_slice(), Default::default()).unwrap();
            let next = state.denominators(0.0).unwrap();
            prop_assert!(next.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = next;
        }
    }
}

#[test]
fn subset_norm_state_is_one_number_per_group() {
    let params = vec![ParamSpec::linear("w", 300, 40)];
    let spec = Preset::AdamSN.spec();
    let size = state_size_for(&spec, &params).unwrap();
    assert_eq!(size.second_moment, 300);
    assert_eq!(size.momentum, 12_000);
}
