//! Run the attention reference on a random fixture and check its invariants.
//!
//! cargo run --example attention_invariants

use forge::attention::{
    average_pool_embed, check_invariants, classify, global_context_embed, spatiotemporal_attention, temporal_attention,
    Fixture,
};

fn main() -> forge::Result<()> {
    let fixture = Fixture::random(3, 4, 5, 3, 4, 6, 2);
    let v = fixture.volume()?;
    let q = fixture.question();

    let tm = temporal_attention(&v, &q, &fixture.att, fixture.dims.steps)?;
    for (k, alpha) in tm.alphas.iter().enumerate() {
        let shown: Vec<String> = alpha.iter().map(|a| format!("{a:.3}")).collect();
        println!("step {} temporal weights: [{}]", k + 1, shown.join(", "));
    }
    let st = spatiotemporal_attention(&v, &q, &fixture.att)?;
    println!("spatio-temporal weights sum to {:.12}", st.alpha.sum());

    let mut embeddings = vec![
        ("temporal", tm.embedding),
        ("spatio-temporal", st.embedding),
        ("average pooling", average_pool_embed(&v)),
    ];
    if let Some(gc) = &fixture.gc {
        embeddings.push(("global context", global_context_embed(&v, gc)?));
    }
    for (name, e) in &embeddings {
        let p = classify(e, &q, &fixture.proj)?;
        let best = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        println!("{name:<16} -> class {best} with p = {:.3}", p[best]);
    }

    for check in check_invariants(&fixture)?.checks {
        println!(
            "{:<45} {} (deviation {:.1e})",
            check.name,
            if check.passed { "ok" } else { "FAILED" },
            check.deviation
        );
    }
    let json = serde_json::to_string(&fixture).expect("fixture serializes");
    println!("fixture JSON is {} bytes", json.len());
    Ok(())
}
