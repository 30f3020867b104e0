use aicons_core::domain::{Chain, MonitoringSample, NodeId};
use aicons_core::metrics::{fit_trend, profit, reward_contribution_ratio};
use aicons_core::recommender::{fedavg, FeatureScaler, ModelConfig, ModelParams};
use aicons_core::rng::seeded;
use aicons_core::shapley::{
    collapse, consensus_average, normalize, shapley_exact, shapley_sampled, CoalitionGame,
    CoalitionInputs, DimensionMask, ShapleyMatrix,
};
use aicons_core::trace::{generate_trace, read_trace, write_trace, TraceSpec};
use proptest::prelude::*;

fn sample(node: u32, bw: f64) -> MonitoringSample {
    MonitoringSample {
        node_id: NodeId(node),
        cpu_tdp_w: 65.0,
        cpu_usage: 0.5,
        mem_usage: 0.5,
        cpi: 1.0,
        bandwidth_kbps: bw,
        cpu_time_s: 1.0,
    }
}

fn resource_game() -> impl Strategy<Value = CoalitionInputs> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1e4, n),
            prop::collection::vec(0.0f64..1e5, n),
        )
            .prop_map(|(e, b)| CoalitionInputs {
                accuracy: None,
                energy_j: e,
                bandwidth_kbps: b,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapley_is_efficient(game in resource_game()) {
        let n = game.players();
        let s = shapley_exact(&game, 12).unwrap();
        let grand = game.utility(&(0..n).collect::<Vec<_>>()).unwrap().to_array();
        for (d, g) in grand.iter().enumerate() {
            let total: f64 = s.column(d).iter().sum();
            prop_assert!((total - g).abs() <= 1e-9 * g.abs().max(1.0));
        }
    }

    #[test]
    fn sampling_is_exact_on_additive_games(game in resource_game(), seed in any::<u64>()) {
        let exact = shapley_exact(&game, 12).unwrap();
        let sampled = shapley_sampled(&game, 50, seed).unwrap();
        for (a, b) in exact.rows.iter().zip(&sampled.rows) {
            for d in 0..3 {
                prop_assert!((a[d] - b[d]).abs() <= 1e-9 * a[d].abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalized_columns_have_unit_l1(rows in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..10)) {
        let n = normalize(&ShapleyMatrix { rows });
        for d in 0..3 {
            let l1: f64 = n.column(d).iter().map(|v| v.abs()).sum();
            prop_assert!(l1 == 0.0 || (l1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collapse_of_equal_columns_is_identity(col in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let m = ShapleyMatrix { rows: col.iter().map(|&v| [v, v, v]).collect() };
        for mask in [DimensionMask::FULL, DimensionMask::ACCURACY, DimensionMask::ACCURACY_ENERGY] {
            let c = collapse(&m, mask).unwrap();
            for (a, b) in c.iter().zip(&col) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn consensus_of_agreeing_evaluators_is_exact(col in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let avg = consensus_average(&vec![col.clone(); col.len()]).unwrap();
        prop_assert_eq!(avg, col);
    }

    #[test]
    fn fedavg_ignores_order(seeds in prop::collection::vec(any::<u64>(), 2..6), rot in 0usize..6) {
        let cfg = ModelConfig::default();
        let models: Vec<ModelParams> = seeds
            .iter()
            .map(|&s| ModelParams::init(&cfg, FeatureScaler::identity(5), &mut seeded(s)).unwrap())
            .collect();
        let mut shuffled = models.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        prop_assert_eq!(fedavg(&models).unwrap(), fedavg(&shuffled).unwrap());
    }

    #[test]
    fn tampering_any_block_is_detected(len in 1usize..12, victim in any::<prop::sample::Index>(), tx in 2u64..5000) {
        let mut chain = Chain::new();
        for i in 0..len {
            chain.append(1000, sample(i as u32 % 3, 100.0 + i as f64), aicons_core::domain::digest(&[i as u8]), i as f64);
        }
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        prop_assert!(Chain::read_jsonl(&buf[..]).is_ok());
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let h = 1 + victim.index(len);
        lines[h] = lines[h].replace("\"tx_count\":1000", &format!("\"tx_count\":{}", 1000 + tx));
        let tampered = lines.join("\n");
        match Chain::read_jsonl(tampered.as_bytes()) {
            Err(aicons_core::Error::Chain { height, .. }) => prop_assert_eq!(height, h as u64),
            other => prop_assert!(false, "unexpected {:?}", other.map(|c| c.len())),
        }
    }

    #[test]
    fn trace_round_trips(records in 10usize..200, nodes in 2usize..8, seed in any::<u64>()) {
        prop_assume!(records >= nodes);
        let spec = TraceSpec { records, nodes, seed, ..TraceSpec::default() };
        let trace = generate_trace(&spec).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(&buf[..], std::path::Path::new("mem"), Some(nodes)).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn profit_is_linear_in_reward(r in 0.0f64..100.0, price in 0.0f64..5000.0, tdp in 0.0f64..300.0, t in 0.0f64..1e5) {
        let base = profit(0.0, price, tdp, t, 0.3).unwrap();
        let p = profit(r, price, tdp, t, 0.3).unwrap();
        prop_assert!((p - base - r * price).abs() <= 1e-9 * (r * price).max(1.0));
        prop_assert!(base <= 0.0);
    }

    #[test]
    fn ratio_is_reward_over_contribution(pairs in prop::collection::vec((0.0f64..10.0, -1.0f64..1.0), 1..12)) {
        let (rewards, contrib): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for row in reward_contribution_ratio(&rewards, &contrib).unwrap() {
            if row.contribution > 0.0 {
                prop_assert!(!row.degenerate);
                prop_assert!((row.ratio * row.contribution - row.reward).abs() < 1e-9);
            } else {
                prop_assert!(row.degenerate && row.ratio == 0.0);
            }
        }
    }

    #[test]
    fn cubic_fit_recovers_cubics(c in prop::array::uniform4(-2.0f64..2.0), offset in -50.0f64..50.0) {
        let xs: Vec<f64> = (0..12).map(|i| offset + i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x).collect();
        let fit = fit_trend(&xs, &ys, 3).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((fit.eval(*x) - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }
}
