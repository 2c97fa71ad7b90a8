//! Multi-threaded embedding of a node set.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use geovec_core::embed::{embed_node, prompt_hash, EmbedError, EmbeddingProvider, GeoRepresentation, PromptSource};
use geovec_core::prompt::PromptVariant;
use geovec_core::NodeSet;

/// [`geovec_core::embed::build_geovec`] over up to `workers` threads.
/// Columns follow the order of `nodes`. On failure the error of the
/// lowest-indexed failing node is returned and no representation is built.
pub fn build_geovec_parallel<P, S>(
    nodes: &NodeSet,
    provider: &P,
    variant: PromptVariant,
    source: &S,
    workers: usize,
) -> Result<GeoRepresentation, EmbedError>
where
    P: EmbeddingProvider + Sync + ?Sized,
    S: PromptSource + Sync + ?Sized,
{
    let n = nodes.len();
    let workers = workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<(String, Vec<f32>), EmbedError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let id = &nodes.ids()[i];
                let r = embed_node(id, nodes.coords()[i], provider, variant, source).map(|(p, v)| (p.text, v));
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });

    let mut texts = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * provider.dim());
    let mut first_err = None;
    for slot in slots {
        match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
            Some(Ok((t, v))) => {
                texts.push(t);
                data.extend_from_slice(&v);
            }
            Some(Err(e)) => {
                first_err = Some(e);
                break;
            }
            None => {}
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    GeoRepresentation::from_columns(
        nodes.ids().to_vec(),
        provider.dim(),
        data,
        provider.id().to_string(),
        variant,
        prompt_hash(texts.iter().map(String::as_str)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use geovec_core::embed::{build_geovec, InstructionPrompts, MockProvider};
    use geovec_core::Coordinate;

    fn nodes(n: usize) -> NodeSet {
        NodeSet::new(
            (0..n).map(|i| format!("n{i}")).collect(),
            (0..n).map(|i| Coordinate::new(i as f64 * 1.7 - 80.0, i as f64 * 0.9 - 45.0).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn matches_sequential_build() {
        let ns = nodes(100);
        let p = MockProvider::new(16, 3).unwrap();
        let seq = build_geovec(&ns, &p, PromptVariant::InstructionOnly, &InstructionPrompts).unwrap();
        for w in [1, 3, 8] {
            let par = build_geovec_parallel(&ns, &p, PromptVariant::InstructionOnly, &InstructionPrompts, w).unwrap();
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn failure_is_whole_build() {
        let ns = nodes(20);
        let p = MockProvider::new(8, 0).unwrap();
        let r = build_geovec_parallel(&ns, &p, PromptVariant::default(), &InstructionPrompts, 4);
        match r {
            Err(EmbedError::Prompt { id, .. }) => assert_eq!(id, "n0"),
            other => panic!("{other:?}"),
        }
    }
}
