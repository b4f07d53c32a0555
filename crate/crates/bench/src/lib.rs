//! Inputs shared by the benchmarks.

use sonir_core::graph::AudioGraph;
use sonir_core::synth::{BuildContext, ParamValue, ParamValues, SynthRegistry};

/// A graph holding one FM voice with a changing index, ready to render.
pub fn fm_graph(sample_rate: u32) -> AudioGraph {
    let registry = SynthRegistry::with_builtins();
    let mut graph = AudioGraph::new(sample_rate);
    let dest = graph.destination();
    let mut fm = registry
        .get("fm")
        .expect("fm is built in")
        .instantiate(&mut graph, dest, &BuildContext::default())
        .expect("fm builds");
    fm.start_all(&mut graph, 0.0).expect("start");
    for (k, hz) in [220.0, 330.0, 440.0, 550.0].into_iter().enumerate() {
        let changes: ParamValues = [("p5", hz), ("p7", 0.5 + k as f64), ("p8", 3.0 - k as f64)]
            .into_iter()
            .map(|(n, v)| (n.to_string(), ParamValue::Quantity(v)))
            .collect();
        fm.dispatch(&mut graph, &changes, k as f64 * 0.5, 0.5)
            .expect("dispatch");
    }
    graph
}

/// A CSV table of `rows` rows mixing numeric and text columns.
pub fn csv_text(rows: usize) -> String {
    let mut text = String::from("t,site,depth,temp\n");
    for i in 0..rows {
        text.push_str(&format!(
            "{i},s{},{},{}\n",
            i % 7,
            (i as f64 * 0.37).sin() * 10.0,
            20.0 + (i % 13) as f64 * 0.5
        ));
    }
    text
}
