use proptest::prelude::*;
use wader_cli::formats::*;
use wader_core::validator::ValidatedExample;
use wader_core::{AugmentedExample, Corpus, LabeledText, PredictionFile};

// Texts with separators, quotes and inner newlines all survive quoting.
fn text() -> impl Strategy<Value = String> {
    "[a-z]{1,6}([ ,\t\"'\n][a-z0-9]{1,6}){0,5}"
}

fn label() -> impl Strategy<Value = f64> {
    (10u32..=50).prop_map(|t| t as f64 / 10.0)
}

fn language() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["en", "es", "zh", "hi"]).prop_map(str::to_string)
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((text(), label(), language()), 1..30).prop_map(|rows| {
        let items = rows
            .into_iter()
            .enumerate()
            .map(|(i, (t, l, lang))| LabeledText::new(format!("id{i}"), t, lang, l).unwrap())
            .collect();
        Corpus::new(items, Vec::<String>::new()).unwrap()
    })
}

fn augmented() -> impl Strategy<Value = Vec<AugmentedExample>> {
    prop::collection::vec((text(), any::<f64>().prop_map(|x| 1.0 + (x.abs() % 4.0)), language()), 0..20).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (t, l, lang))| AugmentedExample {
                    id: format!("s{i}>{lang}"),
                    text: t,
                    language: lang.clone(),
                    derived_label: l,
                    source_id: format!("s{i}"),
                    path: vec!["en".into(), lang],
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn corpus_round_trips_in_both_delimiters(c in corpus(), comma in any::<bool>()) {
        let delimiter = if comma { b',' } else { b'\t' };
        let back = parse_corpus(&render_corpus(&c, delimiter), &[]).unwrap();
        prop_assert_eq!(back.items(), c.items());
    }

    #[test]
    fn predictions_round_trip_exactly(scores in prop::collection::vec(-1e6f64..1e6, 0..40)) {
        let file = PredictionFile::new(scores.iter().enumerate().map(|(i, &s)| (format!("p{i}"), s)).collect()).unwrap();
        let back = parse_predictions(&render_predictions(&file)).unwrap();
        prop_assert_eq!(back.entries(), file.entries());
    }

    #[test]
    fn augmented_round_trips(ex in augmented()) {
        prop_assert_eq!(parse_augmented(&render_augmented(&ex)).unwrap(), ex);
    }

    #[test]
    fn validated_round_trips(ex in augmented(), preds in prop::collection::vec(1.0f64..5.0, 20)) {
        let v: Vec<ValidatedExample> = ex.into_iter().zip(preds).map(|(e, p)| ValidatedExample::new(e, p)).collect();
        prop_assert_eq!(parse_validated(&render_validated(&v)).unwrap(), v);
    }
}

#[test]
fn header_is_case_insensitive_and_ids_are_synthesized() {
    let c = parse_corpus("Text,LABEL,Language\nhello,2.5,EN\nhola,3,es\n", &[]).unwrap();
    let ids: Vec<&str> = c.items().iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, ["en-0", "es-1"]);
    assert_eq!(c.items()[0].language, "en");
}

#[test]
fn malformed_rows_name_their_row() {
    let err = parse_corpus("text\tlabel\tlanguage\na\t2\ten\nb\tsix\ten\n", &[]).unwrap_err();
    assert!(matches!(err, FormatError::Row { row: 2, .. }), "{err}");
    let err = parse_corpus("text\tlabel\tlanguage\na\t7\ten\n", &[]).unwrap_err();
    assert!(matches!(err, FormatError::Row { row: 1, .. }), "{err}");
    assert!(matches!(parse_corpus("text\tlanguage\na\ten\n", &[]), Err(FormatError::MissingColumn("label"))));
    assert!(matches!(parse_corpus("", &[]), Err(FormatError::NoHeader)));
}

#[test]
fn duplicate_prediction_ids_are_rejected() {
    assert!(parse_predictions("a\t1.0\na\t2.0\n").is_err());
    assert!(parse_predictions("a\t1.0\t3\n").is_err());
}

#[test]
fn labels_render_compactly() {
    assert_eq!(format_label(3.0), "3.0");
    assert_eq!(format_label(2.25), "2.25");
    assert_eq!(format_label(1.1), "1.1");
}
