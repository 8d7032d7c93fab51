use impress::simulate::{CorruptionParams, SimulationConfig};
use impress::{EnsembleParams, Simulation64};

const SEEDS: u64 = 10;

fn mean_recalls(miss_rate: f64) -> (f64, f64) {
    let (mut ens, mut base) = (0.0, 0.0);
    for seed in 0..SEEDS {
        let corruption = CorruptionParams::new(miss_rate, 0.1, seed).unwrap();
        let sim = Simulation64::generate(&SimulationConfig::new(200, 60, corruption)).unwrap();
        let c = sim.compare(EnsembleParams::default(), 0.5).unwrap();
        ens += c.ensemble.macro_recall;
        base += c.baseline.macro_recall;
    }
    (ens / SEEDS as f64, base / SEEDS as f64)
}

#[test]
fn missing_labels_hurt_the_baseline_recall_at_least_as_much() {
    let (ens_clean, base_clean) = mean_recalls(0.0);
    let (ens_missing, base_missing) = mean_recalls(0.5);
    let ens_drop = ens_clean - ens_missing;
    let base_drop = base_clean - base_missing;
    assert!(base_drop > 0.0);
    assert!(
        base_drop >= ens_drop,
        "baseline drop {base_drop}, ensemble drop {ens_drop}"
    );
}

#[test]
fn same_seed_same_report() {
    let config = SimulationConfig::new(80, 20, CorruptionParams::new(0.3, 0.1, 9).unwrap());
    let a = Simulation64::generate(&config).unwrap();
    let b = Simulation64::generate(&config).unwrap();
    assert_eq!(a.sigma, b.sigma);
    assert_eq!(a.model.observed_tags, b.model.observed_tags);
    let params = EnsembleParams::default();
    assert_eq!(a.compare(params, 0.5).unwrap(), b.compare(params, 0.5).unwrap());
}

#[test]
fn different_seeds_differ() {
    let a = Simulation64::generate(&SimulationConfig::new(
        80,
        20,
        CorruptionParams::new(0.3, 0.1, 1).unwrap(),
    ));
    let b = Simulation64::generate(&SimulationConfig::new(
        80,
        20,
        CorruptionParams::new(0.3, 0.1, 2).unwrap(),
    ));
    assert_ne!(a.unwrap().model.centers, b.unwrap().model.centers);
}
