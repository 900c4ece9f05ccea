use proptest::prelude::*;

use hosfl::comm::{closed_form_traffic, MessageKind, ProtocolKind, TrafficShape};
use hosfl::config::{parse_config, serialize_config};
use hosfl::data::{dirichlet_partition, iid_partition, make_classification_blobs};
use hosfl::latency::{max_overlapped_perturbations, DeviceProfile, NetworkProfile, WorkloadProfile};
use hosfl::model::{self, ActivationKind, LossKind, SplitModelConfig};
use hosfl::numeric::{axpy, dot, Vector};
use hosfl::optim::OptimizerConfig;
use hosfl::protocol::{sample_clients, Federation, HyperParams};
use hosfl::rng::gaussian_vector;
use hosfl::zo::ZoConfig;

const BASE: &str = r#"
protocol = "hosfl"
root_seed = 1

[model]
layer_dims = [3, 4, 2]
activation = "tanh"
cut_index = 1
loss = "softmax_cross_entropy"

[hp]
eta = 0.1
rounds = 5
clients = 4
clients_per_round = 2
batch_size = 8

[partition]
mode = "iid"

[data]
task = "classification_blobs"
n_train = 64
"#;

fn protocol_strategy() -> impl Strategy<Value = ProtocolKind> {
    prop_oneof![Just(ProtocolKind::Hosfl), Just(ProtocolKind::Sfl), Just(ProtocolKind::Zosfl)]
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iid_partition_is_a_permutation(n in 0usize..300, m in 1usize..20, seed: u64) {
        let shards = iid_partition(n, m, seed).unwrap();
        prop_assert_eq!(shards.len(), m);
        prop_assert_eq!(sorted(shards.concat()), (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn dirichlet_partition_is_a_permutation(
        labels in prop::collection::vec(0usize..5, 1..200),
        m in 1usize..8,
        alpha in 0.05f64..50.0,
        seed: u64,
    ) {
        let shards = dirichlet_partition(&labels, m, alpha, seed).unwrap();
        prop_assert_eq!(shards.len(), m);
        prop_assert_eq!(sorted(shards.concat()), (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn gaussian_vectors_are_reproducible(seed: u64, dim in 0usize..64) {
        let a = gaussian_vector(seed, dim);
        prop_assert_eq!(a.to_le_bytes(), gaussian_vector(seed, dim).to_le_bytes());
        prop_assert!(a.is_finite());
        if dim > 1 {
            let prefix = gaussian_vector(seed, dim - 1);
            prop_assert_eq!(prefix.as_slice(), &a.as_slice()[..dim - 1]);
        }
    }

    #[test]
    fn client_sampling_is_sorted_distinct(m in 1usize..50, frac in 0.0f64..1.0, seed: u64, t: u64) {
        let k = 1 + ((m - 1) as f64 * frac) as usize;
        let s = sample_clients(m, k, seed, t).unwrap();
        prop_assert_eq!(s.len(), k);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&c| c < m));
    }

    #[test]
    fn pmax_shrinks_with_client_depth(
        uplink in 1e6f64..1e9,
        rtt in 0.0f64..0.2,
        client in 1e11f64..1e13,
        server in 1e13f64..1e15,
    ) {
        let net = NetworkProfile { uplink_bps: uplink, downlink_bps: uplink * 4.0, rtt_seconds: rtt };
        let dev = DeviceProfile { client_flops_per_s: client, server_flops_per_s: server };
        let p: Vec<u64> = (1..18)
            .map(|lc| max_overlapped_perturbations(&net, &dev, &WorkloadProfile::llama_1b(lc)))
            .collect();
        prop_assert!(p.windows(2).all(|w| w[0] >= w[1]), "{:?}", p);
    }

    #[test]
    fn ledger_follows_closed_form(
        protocol in protocol_strategy(),
        m in 2usize..6,
        b in 1usize..6,
        perturbations in 1usize..6,
        rounds in 1u64..5,
        seed: u64,
    ) {
        let model = SplitModelConfig::new(vec![3, 4, 2], ActivationKind::Tanh, 1, LossKind::SoftmaxCrossEntropy, true).unwrap();
        let k = m / 2 + 1;
        let hp = HyperParams {
            eta: 0.05,
            rounds,
            clients: m,
            clients_per_round: k,
            batch_size: b,
            zo: ZoConfig::new(perturbations, 1e-3).unwrap(),
            optimizer: OptimizerConfig::Sgd,
        };
        let data = make_classification_blobs(60, 3, 2, 2.0, seed).unwrap();
        let shards = iid_partition(60, m, seed).unwrap();
        let theta = model::init_params(&model, seed);
        let mut fed = Federation::new(model.clone(), hp, seed, data, shards, &theta).unwrap();
        for _ in 0..rounds {
            fed.run_round(protocol).unwrap();
        }
        let shape = TrafficShape {
            clients_per_round: k as u64,
            batch_size: b as u64,
            perturbations: perturbations as u64,
        };
        let per_round = closed_form_traffic(shape, &model, protocol);
        for kind in MessageKind::ALL {
            prop_assert_eq!(fed.ledger.total(kind), rounds * per_round[kind.index()]);
        }
    }

    #[test]
    fn dot_and_axpy_agree(xs in prop::collection::vec(-1e3f64..1e3, 0..40), alpha in -10.0f64..10.0) {
        let x = Vector::new(xs.clone());
        let y = Vector::new(xs.iter().rev().cloned().collect());
        let z = axpy(alpha, &x, &y).unwrap();
        for i in 0..xs.len() {
            prop_assert_eq!(z[i], alpha * x[i] + y[i]);
        }
        let d = dot(&x, &x).unwrap();
        prop_assert!((d - x.norm_sq()).abs() <= 1e-9 * d.max(1.0));
        prop_assert_eq!(dot(&x, &y).unwrap(), dot(&y, &x).unwrap());
        prop_assert!(dot(&x, &Vector::zeros(xs.len() + 1)).is_err());
    }

    #[test]
    fn config_survives_serialization(
        protocol in protocol_strategy(),
        seed in 0..=i64::MAX as u64,
        eta in 1e-4f64..2.0,
        mu in 1e-6f64..0.5,
        p in 1usize..50,
        budget in prop::option::of(1u64..1_000_000),
    ) {
        let mut cfg = parse_config(BASE).unwrap();
        cfg.protocol = protocol;
        cfg.root_seed = seed;
        cfg.hp.eta = eta;
        cfg.hp.zo = ZoConfig::new(p, mu).unwrap();
        cfg.sample_budget = budget;
        let text = serialize_config(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn unrepresentable_seeds_rejected(seed in i64::MAX as u64 + 1..=u64::MAX) {
        let mut cfg = parse_config(BASE).unwrap();
        cfg.root_seed = seed;
        prop_assert!(cfg.validate().is_err());
    }
}
