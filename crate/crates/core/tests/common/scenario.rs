use intentforge_core::pipeline::RunnerConfig;
use intentforge_core::trace::TraceEvent;

pub const PASSING: &str = "```package shop;\n\nimport static org.junit.jupiter.api.Assertions.assertEquals;\n\nimport org.junit.jupiter.api.Test;\n\nclass CartTotalTest {\n    @Test\n    void total_addsSubtotals() {\n        Cart cart = new Cart();\n        cart.add(new Item(\"pen\", Money.of(120), 2));\n        assertEquals(240, cart.total().cents());\n    }\n}\n```";
pub const BROKEN: &str = "```package shop;\n\nclass CartTotalTest {\n    // BROKEN\n    void total() { new Cart().totl(); }\n}\n```";
pub const FAILS: &str = "```package shop;\n\nclass CartTotalTest {\n    // FAILS\n    void total() { }\n}\n```";

/// Compiles unless the file says BROKEN; tests pass unless it says FAILS.
pub fn stub_runner() -> RunnerConfig {
    RunnerConfig {
        compile_cmd: "if grep -q BROKEN {test_file}; then echo \"{test_file}:5: error: cannot find symbol\" >&2; echo '  symbol:   method totl()' >&2; exit 1; fi".into(),
        test_cmd: "if grep -q FAILS {test_file}; then echo 'org.opentest4j.AssertionFailedError: expected: <320> but was: <0>'; exit 1; fi".into(),
        ..RunnerConfig::default()
    }
}

/// Every string in the trace that could carry the held-out test to the model
/// or into a ranking.
pub fn exposed(trace: &[TraceEvent]) -> Vec<String> {
    let mut out = Vec::new();
    for e in trace {
        match e {
            TraceEvent::Prompt { user, system, .. } => {
                out.push(user.clone());
                out.extend(system.clone());
            }
            TraceEvent::RetrievalRanking { scores } => {
                out.extend(scores.iter().flat_map(|s| [s.test.clone(), s.focal.clone()]));
            }
            TraceEvent::UsagesExtracted { enclosing_methods } => out.extend(enclosing_methods.clone()),
            TraceEvent::ReferenceSelected { test, .. } => out.extend(test.clone()),
            TraceEvent::FactsRanked { candidates, selected, .. } => {
                out.extend(selected.clone());
                out.extend(candidates.iter().flat_map(|c| [c.key(), c.rendered.clone()]));
            }
            _ => {}
        }
    }
    out
}
