//! Delimited-text file formats: corpora, prediction files, augmented and
//! validated examples.
//!
//! Corpus files carry a header naming the columns `text`, `label` and
//! `language`, optionally with a leading `id`. The delimiter is a tab when
//! the header line contains one and a comma otherwise. Fields holding the
//! delimiter, quotes or newlines are double-quoted with quotes doubled.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use wader_core::corpus::{synthesize_id, CorpusError};
use wader_core::validator::ValidatedExample;
use wader_core::{AugmentedExample, Corpus, LabeledText, PredictionFile};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("file is empty; a header row is required")]
    NoHeader,
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("unexpected column {0:?}")]
    UnknownColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn row_err(row: usize, message: impl Into<String>) -> FormatError {
    FormatError::Row {
        row,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String, FormatError> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(s)
}

fn detect_delimiter(content: &str) -> u8 {
    let header = content.lines().next().unwrap_or_default();
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn reader(content: &str, has_headers: bool, delimiter: u8) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_headers)
        .flexible(false)
        .from_reader(content.as_bytes())
}

fn writer(delimiter: u8) -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .delimiter(delimiter)
        .quote_style(csv::QuoteStyle::Necessary)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer cannot fail");
    String::from_utf8(bytes).expect("fields are valid UTF-8")
}

/// Column positions resolved from a header row.
struct Columns {
    positions: Vec<usize>,
}

impl Columns {
    fn resolve(
        header: &csv::StringRecord,
        required: &[&'static str],
        optional: &[&'static str],
    ) -> Result<Self, FormatError> {
        let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        for name in &names {
            if !required.contains(&name.as_str()) && !optional.contains(&name.as_str()) {
                return Err(FormatError::UnknownColumn(name.clone()));
            }
        }
        let mut positions = Vec::new();
        for &col in required.iter().chain(optional) {
            match names.iter().position(|n| n == col) {
                Some(p) => positions.push(p),
                None if required.contains(&col) => return Err(FormatError::MissingColumn(col)),
                None => positions.push(usize::MAX),
            }
        }
        Ok(Columns { positions })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, k: usize) -> Option<&'r str> {
        record.get(self.positions[k])
    }
}

fn parse_f64(row: usize, column: &str, raw: &str) -> Result<f64, FormatError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| row_err(row, format!("{column} {raw:?} is not a number")))
}

/// Render a label with at most six fractional digits.
pub fn format_label(label: f64) -> String {
    let mut s = format!("{label:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

/// Parse a corpus file's contents. Row numbers in errors count data rows
/// from 1.
pub fn parse_corpus(content: &str, unseen: &[String]) -> Result<Corpus, FormatError> {
    if content.trim().is_empty() {
        return Err(FormatError::NoHeader);
    }
    let mut rdr = reader(content, true, detect_delimiter(content));
    let cols = Columns::resolve(rdr.headers()?, &["text", "label", "language"], &["id"])?;
    let mut items = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        let text = cols.get(&record, 0).unwrap_or_default();
        let label = parse_f64(row, "label", cols.get(&record, 1).unwrap_or_default())?;
        let language = cols.get(&record, 2).unwrap_or_default().trim().to_ascii_lowercase();
        let id = match cols.get(&record, 3) {
            Some(id) => id.trim().to_string(),
            None => synthesize_id(&language, i),
        };
        if !ids.insert(id.clone()) {
            return Err(row_err(row, format!("duplicate id {id:?}")));
        }
        let item = LabeledText::new(id, text, language, label).map_err(|e| row_err(row, e.to_string()))?;
        items.push(item);
    }
    Ok(Corpus::new(items, unseen.iter().cloned())?)
}

pub fn load_corpus(path: &Path, unseen: &[String]) -> Result<Corpus, FormatError> {
    parse_corpus(&read_to_string(path)?, unseen)
}

/// Render a corpus with an id column.
pub fn render_corpus(corpus: &Corpus, delimiter: u8) -> String {
    let mut w = writer(delimiter);
    w.write_record(["id", "text", "label", "language"]).expect("in-memory write");
    for item in corpus.items() {
        w.write_record([
            item.id.as_str(),
            item.text.as_str(),
            &format_label(item.label),
            item.language.as_str(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// Tab-delimited unless the file name ends in `.csv`.
pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => b',',
        _ => b'\t',
    }
}

/// Prediction files: `id<TAB>score`, no header.
pub fn parse_predictions(content: &str) -> Result<PredictionFile, FormatError> {
    let mut rdr = reader(content, false, b'\t');
    let mut entries = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != 2 {
            return Err(row_err(row, format!("expected 2 columns, found {}", record.len())));
        }
        let score = parse_f64(row, "score", &record[1])?;
        entries.push((record[0].to_string(), score));
    }
    PredictionFile::new(entries).map_err(|e| row_err(0, e.to_string()))
}

pub fn load_predictions(path: &Path) -> Result<PredictionFile, FormatError> {
    parse_predictions(&read_to_string(path)?)
}

pub fn render_predictions(predictions: &PredictionFile) -> String {
    let mut w = writer(b'\t');
    for (id, score) in predictions.entries() {
        w.write_record([id.as_str(), &score.to_string()]).expect("in-memory write");
    }
    finish(w)
}

const AUGMENTED_COLUMNS: [&str; 6] = ["id", "text", "language", "derived_label", "source_id", "path"];
const VALIDATED_COLUMNS: [&str; 8] = [
    "id",
    "text",
    "language",
    "derived_label",
    "predicted_label",
    "difference",
    "source_id",
    "path",
];

fn split_path(raw: &str) -> Vec<String> {
    raw.split('>').map(str::to_string).collect()
}

fn example_from(
    cols: &Columns,
    record: &csv::StringRecord,
    row: usize,
    path_col: usize,
    source_col: usize,
) -> Result<AugmentedExample, FormatError> {
    let field = |k: usize| cols.get(record, k).unwrap_or_default();
    Ok(AugmentedExample {
        id: field(0).to_string(),
        text: field(1).to_string(),
        language: field(2).to_string(),
        derived_label: parse_f64(row, "derived_label", field(3))?,
        source_id: field(source_col).to_string(),
        path: split_path(field(path_col)),
    })
}

/// Translated examples with provenance; `path` is joined with `>`.
pub fn render_augmented(examples: &[AugmentedExample]) -> String {
    let mut w = writer(b'\t');
    w.write_record(AUGMENTED_COLUMNS).expect("in-memory write");
    for e in examples {
        w.write_record([
            e.id.as_str(),
            e.text.as_str(),
            e.language.as_str(),
            &e.derived_label.to_string(),
            e.source_id.as_str(),
            &e.path.join(">"),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn parse_augmented(content: &str) -> Result<Vec<AugmentedExample>, FormatError> {
    let mut rdr = reader(content, true, b'\t');
    let cols = Columns::resolve(rdr.headers()?, &AUGMENTED_COLUMNS, &[])?;
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            let record = r.map_err(|e| row_err(i + 1, e.to_string()))?;
            example_from(&cols, &record, i + 1, 5, 4)
        })
        .collect()
}

pub fn load_augmented(path: &Path) -> Result<Vec<AugmentedExample>, FormatError> {
    parse_augmented(&read_to_string(path)?)
}

pub fn render_validated(validated: &[ValidatedExample]) -> String {
    let mut w = writer(b'\t');
    w.write_record(VALIDATED_COLUMNS).expect("in-memory write");
    for v in validated {
        let e = &v.example;
        w.write_record([
            e.id.as_str(),
            e.text.as_str(),
            e.language.as_str(),
            &e.derived_label.to_string(),
            &v.predicted_label.to_string(),
            &v.difference.to_string(),
            e.source_id.as_str(),
            &e.path.join(">"),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn parse_validated(content: &str) -> Result<Vec<ValidatedExample>, FormatError> {
    let mut rdr = reader(content, true, b'\t');
    let cols = Columns::resolve(rdr.headers()?, &VALIDATED_COLUMNS, &[])?;
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let record = r.map_err(|e| row_err(row, e.to_string()))?;
            let example = example_from(&cols, &record, row, 7, 6)?;
            let predicted_label = parse_f64(row, "predicted_label", cols.get(&record, 4).unwrap_or_default())?;
            let difference = parse_f64(row, "difference", cols.get(&record, 5).unwrap_or_default())?;
            Ok(ValidatedExample {
                example,
                predicted_label,
                difference,
            })
        })
        .collect()
}

pub fn load_validated(path: &Path) -> Result<Vec<ValidatedExample>, FormatError> {
    parse_validated(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_in_order() {
        let c = parse_corpus("text,label,language\nhello,1.2,en\nbonjour,3.4,FR\nhola,5,es\n", &[]).unwrap();
        let ids: Vec<_> = c.items().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, vec!["en-0", "fr-1", "es-2"]);
        assert_eq!(c.items()[1].language, "fr");
        assert_eq!(c.items()[2].label, 5.0);
    }

    #[test]
    fn tab_delimited_with_ids_and_quotes() {
        let src = "id\ttext\tlabel\tlanguage\na1\t\"tab\there, \"\"quoted\"\"\nand newline\"\t2.5\ten\n";
        let c = parse_corpus(src, &["hi".to_string()]).unwrap();
        assert_eq!(c.items()[0].id, "a1");
        assert_eq!(c.items()[0].text, "tab\there, \"quoted\"\nand newline");
        assert!(c.unseen_languages().contains("hi"));
    }

    #[test]
    fn out_of_range_label_names_row() {
        let err = parse_corpus("text,label,language\nok,2,en\nbad,5.7,en\n", &[]).unwrap_err();
        match err {
            FormatError::Row { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("5.7"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_corpus("", &[]), Err(FormatError::NoHeader)));
        assert!(matches!(
            parse_corpus("text,language\nx,en\n", &[]),
            Err(FormatError::MissingColumn("label"))
        ));
        assert!(matches!(
            parse_corpus("text,label,language,extra\nx,1,en,y\n", &[]),
            Err(FormatError::UnknownColumn(_))
        ));
        assert!(matches!(
            parse_corpus("id,text,label,language\na,x,1,en\na,y,2,en\n", &[]),
            Err(FormatError::Row { row: 2, .. })
        ));
        assert!(matches!(
            parse_corpus("text,label,language\n   ,1,en\n", &[]),
            Err(FormatError::Row { row: 1, .. })
        ));
        assert!(matches!(
            parse_corpus("text,label,language\nx,abc,en\n", &[]),
            Err(FormatError::Row { row: 1, .. })
        ));
        assert!(matches!(
            parse_corpus("text,label,language\nx,1\n", &[]),
            Err(FormatError::Row { row: 1, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/corpus.tsv"), &[]),
            Err(FormatError::Io { .. })
        ));
    }

    #[test]
    fn label_rendering() {
        assert_eq!(format_label(3.2), "3.2");
        assert_eq!(format_label(2.0), "2.0");
        assert_eq!(format_label(1.23456789), "1.234568");
        assert_eq!(format_label(5.0), "5.0");
    }

    #[test]
    fn predictions_round_trip() {
        let p = PredictionFile::new(vec![("a".into(), 2.3), ("b".into(), 1.0 / 3.0)]).unwrap();
        let text = render_predictions(&p);
        assert!(text.starts_with("a\t2.3\n"));
        assert_eq!(parse_predictions(&text).unwrap(), p);
        assert!(parse_predictions("a\t1\na\t2\n").is_err());
        assert!(parse_predictions("a\t1\t3\n").is_err());
    }

    #[test]
    fn validated_round_trip() {
        let e = AugmentedExample {
            id: "en-0>fr>en".into(),
            text: "we \"are\"\tclose".into(),
            language: "en".into(),
            derived_label: 4.2,
            source_id: "en-0".into(),
            path: vec!["en".into(), "fr".into(), "en".into()],
        };
        let v = vec![ValidatedExample::new(e.clone(), 3.7)];
        assert_eq!(parse_validated(&render_validated(&v)).unwrap(), v);
        assert_eq!(parse_augmented(&render_augmented(std::slice::from_ref(&e))).unwrap(), vec![e]);
    }
}
