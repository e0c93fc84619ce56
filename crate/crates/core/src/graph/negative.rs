use std::collections::HashSet;

use rand::Rng as _;

use super::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Resampling budget before a negative draw is declared saturated.
pub const MAX_NEGATIVE_ATTEMPTS: usize = 1000;

/// Which slot of a triple to replace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptMode {
    Head,
    Tail,
    /// Head or tail with equal probability, redrawn on every attempt.
    Either,
}

/// Replace the head or tail with a different, uniformly drawn entity such
/// that the result is not a triple of `kg`.
pub fn corrupt_triple(kg: &KnowledgeGraph, t: Triple, mode: CorruptMode, rng: &mut Rng) -> Result<Triple> {
    let n = kg.num_entities();
    if n < 2 {
        return Err(Error::invalid("corruption needs at least two entities"));
    }
    for _ in 0..MAX_NEGATIVE_ATTEMPTS {
        let head_side = match mode {
            CorruptMode::Head => true,
            CorruptMode::Tail => false,
            CorruptMode::Either => rng.gen_bool(0.5),
        };
        let current = if head_side { t.head } else { t.tail };
        let mut e = rng.gen_range(0..n - 1);
        if e >= current {
            e += 1;
        }
        let candidate = if head_side {
            Triple { head: e, ..t }
        } else {
            Triple { tail: e, ..t }
        };
        if !kg.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::Saturated {
        attempts: MAX_NEGATIVE_ATTEMPTS,
    })
}

/// Draw `count` ordered pairs `(u, v)`, `u != v`, uniformly with replacement
/// from the pairs joined by no triple in either relation.
pub fn sample_negative_edges(kg: &KnowledgeGraph, count: usize, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = kg.num_entities();
    if n < 2 {
        return Err(Error::invalid("negative edges need at least two entities"));
    }
    let edges: HashSet<(usize, usize)> = kg.triples().iter().map(|t| (t.head, t.tail)).collect();
    let mut out = Vec::with_capacity(count);
    'draw: for _ in 0..count {
        for _ in 0..MAX_NEGATIVE_ATTEMPTS {
            let u = rng.gen_range(0..n);
            let mut v = rng.gen_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            if !edges.contains(&(u, v)) {
                out.push((u, v));
                continue 'draw;
            }
        }
        return Err(Error::Saturated {
            attempts: MAX_NEGATIVE_ATTEMPTS,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, Structure, SyntheticSpec};
    use crate::rng::seeded;

    #[test]
    fn two_entity_tail_corruption_is_forced() {
        let mut b = KnowledgeGraph::builder();
        b.add_named_triple("a", "r", "b");
        let g = b.build();
        let mut rng = seeded(0);
        for _ in 0..20 {
            let c = corrupt_triple(&g, Triple::new(0, 0, 1), CorruptMode::Tail, &mut rng).unwrap();
            assert_eq!(c, Triple::new(0, 0, 0));
        }
    }

    #[test]
    fn corruption_changes_only_one_slot() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::TwoBlock, 30, 3, 5)).unwrap();
        let mut rng = seeded(1);
        for &t in g.triples().iter().take(50) {
            for mode in [CorruptMode::Head, CorruptMode::Tail, CorruptMode::Either] {
                let c = corrupt_triple(&g, t, mode, &mut rng).unwrap();
                assert!(!g.contains(&c));
                assert_eq!(c.relation, t.relation);
                let changed = (c.head != t.head) as u8 + (c.tail != t.tail) as u8;
                assert_eq!(changed, 1);
                match mode {
                    CorruptMode::Head => assert_eq!(c.tail, t.tail),
                    CorruptMode::Tail => assert_eq!(c.head, t.head),
                    CorruptMode::Either => {}
                }
            }
        }
    }

    #[test]
    fn saturation_reported() {
        // Complete graph with self-loops: no tail corruption exists.
        let mut b = KnowledgeGraph::builder();
        for u in 0..3 {
            for v in 0..3 {
                b.add_named_triple(&u.to_string(), "r", &v.to_string());
            }
        }
        let g = b.build();
        let r = corrupt_triple(&g, Triple::new(0, 0, 1), CorruptMode::Either, &mut seeded(0));
        assert!(matches!(r, Err(Error::Saturated { attempts: 1000 })));
        assert!(matches!(
            sample_negative_edges(&g, 1, &mut seeded(0)),
            Err(Error::Saturated { .. })
        ));
    }

    #[test]
    fn single_missing_pair_always_sampled() {
        let mut b = KnowledgeGraph::builder();
        for u in 0..3 {
            for v in 0..3 {
                if u != v && !(u == 2 && v == 0) {
                    b.add_named_triple(&u.to_string(), "r", &v.to_string());
                }
            }
        }
        let g = b.build();
        let (u2, v0) = (g.entities().get("2").unwrap(), g.entities().get("0").unwrap());
        let s = sample_negative_edges(&g, 50, &mut seeded(4)).unwrap();
        assert!(s.iter().all(|&p| p == (u2, v0)));
        assert!(sample_negative_edges(&g, 0, &mut seeded(4)).unwrap().is_empty());
    }
}
