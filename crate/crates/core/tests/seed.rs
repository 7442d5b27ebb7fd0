use qdml::seed::*;
use std::collections::HashSet;

#[test]
fn deterministic_and_distinct() {
    assert_eq!(derive(7, "hpo", 3), derive(7, "hpo", 3));
    let seeds: HashSet<u64> = (0..1000)
        .flat_map(|i| ["hpo", "ensemble", "split"].map(|l| derive(7, l, i)))
        .collect();
    assert_eq!(seeds.len(), 3000);
    assert_ne!(derive(7, "hpo", 0), derive(8, "hpo", 0));
}
