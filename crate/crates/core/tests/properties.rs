use levqe::align::{edit_distance, levenshtein_align, ter_align, EditOp};
use levqe::levt::{decode, qe_predict, step, GapQuery, LevtConfig, OracleScorer, RandomScorer, Scorer};
use levqe::subword::{heuristic_subword_tags, subword_to_word_tags, FlatTagSeq, SubwordSeq, DEFAULT_MARKER};
use levqe::synth::{triplets_to_training, ChunkSegmenter, Origin, TripletRecord};
use levqe::tags::{mcc, tags_from_alignment, ConfusionCounts, Tag};
use levqe::TokenSeq;
use proptest::prelude::*;

fn seq(max: usize, vocab: u8) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..vocab, 0..=max)
}

fn tokens(s: &[u8]) -> TokenSeq {
    TokenSeq::new(s.iter().map(|&c| ((b'a' + c) as char).to_string())).unwrap()
}

fn tags(len: usize) -> impl Strategy<Value = FlatTagSeq> {
    prop::collection::vec(prop::bool::weighted(0.3), 2 * len + 1)
        .prop_map(|v| FlatTagSeq::new(v.into_iter().map(Tag::from).collect()).unwrap())
}

/// Segmentation sizes per word, then the segmented sequence.
fn segmented() -> impl Strategy<Value = SubwordSeq> {
    prop::collection::vec(1usize..=4, 0..=12).prop_map(|sizes| {
        let mut pieces = Vec::new();
        for (w, &n) in sizes.iter().enumerate() {
            for k in 0..n {
                pieces.push(format!("w{w}.{k}{}", if k + 1 < n { DEFAULT_MARKER } else { "" }));
            }
        }
        SubwordSeq::parse(TokenSeq::new(pieces).unwrap(), DEFAULT_MARKER).unwrap()
    })
}

/// A segmentation with random word tags and random naive subword tags.
fn with_tags() -> impl Strategy<Value = (SubwordSeq, FlatTagSeq, FlatTagSeq)> {
    segmented().prop_flat_map(|sw| {
        let (w, m) = (sw.word_count(), sw.subtokens().len());
        (Just(sw), tags(w), tags(m))
    })
}

proptest! {
    #[test]
    fn cost_is_symmetric_with_roles_swapped(a in seq(12, 4), b in seq(12, 4)) {
        let ab = levenshtein_align(&a, &b);
        let ba = levenshtein_align(&b, &a);
        prop_assert_eq!(ab.cost, ba.cost);
        // the script read backwards (roles and Delete/Insert exchanged) aligns b to a
        let swapped = levqe::EditScript {
            ops: ab.ops.iter().map(|op| match *op {
                EditOp::Match { hyp, reference } => EditOp::Match { hyp: reference, reference: hyp },
                EditOp::Substitute { hyp, reference } => EditOp::Substitute { hyp: reference, reference: hyp },
                EditOp::Delete { hyp } => EditOp::Insert { reference: hyp },
                EditOp::Insert { reference } => EditOp::Delete { hyp: reference },
                shift => shift,
            }).collect(),
            cost: ab.cost,
        };
        swapped.validate(b.len(), a.len()).unwrap();
        for op in &swapped.ops {
            match *op {
                EditOp::Match { hyp, reference } => prop_assert_eq!(b[hyp], a[reference]),
                EditOp::Substitute { hyp, reference } => prop_assert_ne!(b[hyp], a[reference]),
                _ => {}
            }
        }
    }

    #[test]
    fn shifts_never_increase_cost(a in seq(14, 3), b in seq(14, 3)) {
        let plain = ter_align(&a, &b, false);
        let shifted = ter_align(&a, &b, true);
        prop_assert!(shifted.cost <= plain.cost);
        prop_assert_eq!(plain.cost, edit_distance(&a, &b));
        shifted.validate(a.len(), b.len()).unwrap();
    }

    #[test]
    fn edit_distance_triangle(a in seq(10, 3), b in seq(10, 3), c in seq(10, 3)) {
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
    }

    #[test]
    fn tags_have_task_shape_and_bad_iff_different(a in seq(12, 3), b in seq(12, 3)) {
        let t = tags_from_alignment(&levenshtein_align(&a, &b), a.len()).unwrap();
        prop_assert_eq!(t.words().len(), a.len());
        prop_assert_eq!(t.gaps().len(), a.len() + 1);
        prop_assert_eq!(t.bad_count() == 0, a == b);
    }

    #[test]
    fn mcc_swap_invariant_and_bounded(tp in 0u64..10_000, fp in 0u64..10_000, tn in 0u64..10_000, fn_ in 1u64..10_000) {
        let c = ConfusionCounts::new(tp, fp, tn, fn_);
        let m = mcc(&c).unwrap();
        prop_assert!((m - mcc(&c.swapped()).unwrap()).abs() <= 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m));
    }

    #[test]
    fn mcc_extremes(tp in 1u64..1000, tn in 1u64..1000, fp in 1u64..1000, fn_ in 1u64..1000) {
        prop_assert!((mcc(&ConfusionCounts::new(tp, 0, tn, 0)).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!((mcc(&ConfusionCounts::new(0, fp, 0, fn_)).unwrap() + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn heuristic_round_trips((sw, q_w, naive) in with_tags()) {
        let q_sw = heuristic_subword_tags(&sw, &naive, &q_w).unwrap();
        prop_assert_eq!(q_sw.tags().len() % 2, 1);
        prop_assert_eq!(q_sw.token_count(), sw.subtokens().len());
        // word-level gaps pass through at each word boundary
        for (k, &(s, _)) in sw.spans().iter().enumerate() {
            prop_assert_eq!(q_sw.gap(s), q_w.gap(k));
        }
        prop_assert_eq!(q_sw.last_gap(), q_w.last_gap());
        prop_assert_eq!(subword_to_word_tags(&sw, &q_sw).unwrap(), q_w);
    }

    #[test]
    fn collapse_is_monotone(sw in segmented(), flips in prop::collection::vec(any::<prop::sample::Index>(), 1..4), base in any::<u64>()) {
        let n = 2 * sw.subtokens().len() + 1;
        let before: Vec<Tag> = (0..n).map(|i| Tag::from((base >> (i % 64)) & 1 == 1)).collect();
        let mut after = before.clone();
        for f in &flips {
            after[f.index(n)] = Tag::Bad;
        }
        let wb = subword_to_word_tags(&sw, &FlatTagSeq::new(before).unwrap()).unwrap();
        let wa = subword_to_word_tags(&sw, &FlatTagSeq::new(after).unwrap()).unwrap();
        for (b, a) in wb.tags().iter().zip(wa.tags()) {
            prop_assert!(!(b.is_bad() && !a.is_bad()), "BAD turned OK");
        }
    }

    #[test]
    fn decode_bookkeeping_and_fixpoint(y0 in seq(10, 5), target in seq(10, 5), seed in any::<u64>()) {
        let config = LevtConfig::default();
        let y0 = tokens(&y0);
        let random = RandomScorer::new(seed);
        let oracle = OracleScorer::new(tokens(&target));
        let scorers: [&dyn Scorer; 2] = [&random, &oracle];
        for scorer in scorers {
            let out = decode(&[], &y0, scorer, 6, &config).unwrap();
            let mut prev = y0.len();
            for s in &out.trace {
                prop_assert_eq!(s.j0, prev);
                prop_assert_eq!(s.j1, s.j0 - s.deleted);
                prop_assert_eq!(s.j2, s.j1 + s.inserted);
                prop_assert!(!s.state.iter().any(|t| t == levqe::levt::MASK_TOKEN));
                prev = s.state.len();
            }
            if out.converged {
                let (again, _) = step(&[], &out.output, scorer, &config, 99).unwrap();
                prop_assert_eq!(&again.state, &out.output);
            }
        }
    }

    #[test]
    fn qe_predict_has_task_shape(mt in seq(12, 5), seed in any::<u64>(), tau in 0.05f64..0.95, post in any::<bool>()) {
        let mt = tokens(&mt);
        let query = if post { GapQuery::PostDeletion } else { GapQuery::Original };
        let t = qe_predict(&[], &mt, &RandomScorer::new(seed), tau, query, &LevtConfig::default()).unwrap();
        prop_assert_eq!(t.words().len(), mt.len());
        prop_assert_eq!(t.gaps().len(), mt.len() + 1);
    }

    #[test]
    fn training_records_round_trip(mt in seq(8, 4), pe in seq(8, 4), width in 1usize..4) {
        let triplet = TripletRecord {
            src: TokenSeq::from_line("s"),
            mt: TokenSeq::new(mt.iter().map(|&c| "abcd"[c as usize..].repeat(2))).unwrap(),
            pe: TokenSeq::new(pe.iter().map(|&c| "abcd"[c as usize..].repeat(2))).unwrap(),
            origin: Origin::Human,
        };
        let seg = ChunkSegmenter { width, marker: DEFAULT_MARKER.into() };
        let report = triplets_to_training(std::slice::from_ref(&triplet), &seg);
        for r in &report.records {
            prop_assert_eq!(&subword_to_word_tags(&r.mt_subwords, &r.subword_tags).unwrap(), &r.word_tags);
        }
        prop_assert_eq!(report.records.len() + report.skipped.len(), 1);
    }
}
