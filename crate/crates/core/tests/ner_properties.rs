mod support;

use chrono::{TimeZone, Utc};
use msrbot_core::ner::{evaluate_ner, recognize, EntityType, Gazetteer, NerCase, NowClock};
use proptest::prelude::*;

fn clock() -> NowClock {
    NowClock::fixed(Utc.with_ymd_and_hms(2020, 3, 1, 12, 0, 0).unwrap())
}

fn gazetteer() -> Gazetteer {
    Gazetteer::from_kb(&support::fixture_kb())
}

fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec![
            "which", "commits", "fixed", "who", "modified", "the", "file", "in", "last", "week", "between",
            "and", "-", "top", "5", "bugs", "open", "blocker", "buggy", "fixing", "Foo.java", "src/Bar.java",
            "HHH-1", "HHH-22", "c2c2c2c", "May", "27th", "2018", "27/5/2018", "2019-01-01", "to", "from",
            "of", "yesterday", "résumé", "über.txt", "?", ",", "days", "this", "month", "3",
        ])
        .prop_map(str::to_string),
        "[a-zA-Z0-9./_-]{1,10}",
        "\\PC{1,4}",
    ]
}

fn utterance() -> impl Strategy<Value = String> {
    prop::collection::vec(fragment(), 1..14).prop_map(|parts| parts.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn spans_are_disjoint_ordered_and_faithful(text in utterance()) {
        let g = gazetteer();
        let Ok(entities) = recognize(&text, &g, clock()) else { return Ok(()) };
        let chars: Vec<char> = text.chars().collect();
        let mut last_end = 0;
        for e in &entities {
            let (s, t) = e.span;
            prop_assert!(s < t && t <= chars.len(), "{:?} in {:?}", e.span, text);
            prop_assert!(s >= last_end, "overlap at {:?} in {:?}", e.span, text);
            last_end = t;
            let slice: String = chars[s..t].iter().collect();
            prop_assert_eq!(&slice, &e.surface);
            let (bs, bt) = e.byte_span();
            prop_assert_eq!(&text[bs..bt], e.surface.as_str());
        }
    }

    #[test]
    fn recognition_is_deterministic(text in utterance()) {
        let g = gazetteer();
        let a = recognize(&text, &g, clock());
        let b = recognize(&text, &g, clock());
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

fn labeled() -> Vec<NerCase> {
    serde_json::from_str(&std::fs::read_to_string(support::data_dir().join("ner/labeled.json")).unwrap()).unwrap()
}

#[test]
fn gold_surfaces_match_offsets() {
    for case in labeled() {
        let chars: Vec<char> = case.utterance.chars().collect();
        for g in &case.entities {
            let slice: String = chars[g.start..g.end].iter().collect();
            assert_eq!(slice, g.surface, "{}", case.utterance);
        }
    }
}

#[test]
fn labeled_set_f1_is_high() {
    let score = evaluate_ner(&labeled(), &gazetteer(), clock());
    // recompute from the counts rather than trusting the reported ratio
    let p = score.true_positives as f64 / (score.true_positives + score.false_positives) as f64;
    let r = score.true_positives as f64 / (score.true_positives + score.false_negatives) as f64;
    let f1 = 2.0 * p * r / (p + r);
    assert!((f1 - score.f1).abs() < 1e-12);
    assert!(f1 >= 0.9, "F1 {f1:.3}: {score:?}");
    assert!(score.errors.is_empty());
}

#[test]
fn every_entity_type_is_covered_by_the_labeled_set() {
    let cases = labeled();
    for t in EntityType::ALL {
        assert!(cases.iter().any(|c| c.entities.iter().any(|e| e.entity_type == t)), "{t:?} missing");
    }
}
