use std::sync::Arc;

use deliberate::harness::{run_scripted_with, AgentProfile, DEFAULT_SEED};
use deliberate::runtime::{BudgetMode, LoopConfig, Memories};
use deliberate::sakg::{HashingEmbedder, KgConfig, KnowledgeGraph};
use deliberate::samb::{MemoryItem, SambWeights, StateActionBank};
use deliberate::sim::pack;
use deliberate::time::Timestamp;
use deliberate::ActionId;
use proptest::prelude::*;

fn item(key: &str, summary: &str, hours: u64) -> MemoryItem {
    MemoryItem::new(key, summary, vec![ActionId::new("move:east")], Timestamp::from_hours(hours), "test")
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn irrelevant_items_do_not_reorder_existing_ones(noise in 0usize..40) {
        let mut bank = StateActionBank::new(SambWeights::default());
        bank.insert(item("a", "river bank north of the farm", 1));
        bank.insert(item("b", "farm field with crops", 3));
        bank.insert(item("c", "river crossing near farm", 0));
        let order = |bank: &StateActionBank| -> Vec<String> {
            bank.retrieve_hints("river farm", 100, Timestamp::from_hours(4))
                .into_iter()
                .filter(|h| ["a", "b", "c"].contains(&h.key.as_str()))
                .map(|h| h.key)
                .collect()
        };
        let before = order(&bank);
        for i in 0..noise {
            bank.insert(item(&format!("z{i:03}"), "unrelated desert", 2));
        }
        prop_assert_eq!(before, order(&bank));
    }
}

#[test]
fn shared_memories_survive_persistence() {
    let cfg = LoopConfig::default();
    let mut memories = Memories::new(&cfg);
    for (i, scenario) in pack::standard().iter().enumerate() {
        run_scripted_with(scenario, &cfg, BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, i as u32, &mut memories).unwrap();
    }
    assert!(!memories.bank.is_empty() && memories.graph.edge_count() > 0);

    let dir = tempfile::tempdir().unwrap();
    let (bank_path, nodes, edges) = (dir.path().join("bank.jsonl"), dir.path().join("nodes.jsonl"), dir.path().join("edges.jsonl"));
    memories.bank.save_jsonl(&bank_path).unwrap();
    memories.graph.save_jsonl(&nodes, &edges).unwrap();

    let bank = StateActionBank::load_jsonl(&bank_path, SambWeights::default()).unwrap();
    let embedder = Arc::new(HashingEmbedder::new(HashingEmbedder::DEFAULT_DIM, 0));
    let graph = KnowledgeGraph::load_jsonl(&nodes, &edges, KgConfig::default(), embedder).unwrap();
    assert_eq!(bank.items().collect::<Vec<_>>(), memories.bank.items().collect::<Vec<_>>());
    assert_eq!(graph.edges().collect::<Vec<_>>(), memories.graph.edges().collect::<Vec<_>>());
    assert_eq!(graph.node_count(), memories.graph.node_count());
}

#[test]
fn corrupt_edge_file_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = KnowledgeGraph::with_hashing(KgConfig::default());
    g.upsert_transition("a", &ActionId::new("go"), "b", true, 1.0, Timestamp(0)).unwrap();
    let (nodes, edges) = (dir.path().join("n.jsonl"), dir.path().join("e.jsonl"));
    g.save_jsonl(&nodes, &edges).unwrap();
    let text = std::fs::read_to_string(&edges).unwrap();
    std::fs::write(&edges, format!("{text}{{\"from\": 0,\n")).unwrap();
    let err = KnowledgeGraph::load_jsonl(&nodes, &edges, KgConfig::default(), g.embedder().clone()).unwrap_err();
    assert!(err.to_string().contains("e.jsonl:2"), "{err}");
}
