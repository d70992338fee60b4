//! CSV serialization.
//!
//! Numbers are written with at most 12 significant digits so that files
//! (and their hashes) do not depend on last-bit differences between math
//! libraries. Missing values are written as `NA`.

use std::io::{Read, Write};

use crate::analysis::AdditivityReport;
use crate::error::{Error, Result};
use crate::geometry::{Indexing, SalienceProfile, SimilarityTable};
use crate::solver::PredictionReport;
use crate::space::{CompInput, ComponentSpace, Conjunction};
use crate::tasks::{CompositionalDataset, Example, Split, TaskKind};

pub const NA: &str = "NA";

/// Formats `x` rounded to 12 significant digits, in the shortest form that
/// reads back to the rounded value.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return NA.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    if rounded == 0.0 {
        return "0".to_string();
    }
    let a = rounded.abs();
    if !(1e-6..1e16).contains(&a) {
        return format!("{rounded:e}");
    }
    rounded.to_string()
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt_num)
}

pub fn parse_num(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s == NA || s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("`{s}` is not a number")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn write_rows<W: Write>(w: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(&r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_rows<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
}

fn component_header(c: usize) -> impl Iterator<Item = String> {
    (0..c).map(|i| format!("z_{i}"))
}

fn component_fields(z: &CompInput) -> impl Iterator<Item = String> + '_ {
    z.0.iter().map(|v| v.to_string())
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(Error::Parse(format!("unknown split `{s}`"))),
    }
}

// --- datasets ---

pub fn write_dataset<W: Write>(w: W, d: &CompositionalDataset) -> Result<()> {
    let c = d.space.num_components();
    let header: Vec<String> = component_header(c).chain(["target".into(), "split".into()]).collect();
    write_rows(
        w,
        &header,
        d.rows().map(|(split, e)| {
            component_fields(&e.input)
                .chain([fmt_num(e.target), split.to_string()])
                .collect()
        }),
    )
}

/// Reads a dataset. Cardinalities are taken as `max index + 1` per slot
/// unless given. Without an explicit kind, a dataset whose targets are all
/// ±1 is read as classification.
pub fn read_dataset<R: Read>(
    r: R,
    cardinalities: Option<Vec<usize>>,
    kind: Option<TaskKind>,
) -> Result<CompositionalDataset> {
    let (header, rows) = read_rows(r)?;
    let c = header.iter().take_while(|h| h.starts_with("z_")).count();
    if c == 0 {
        return Err(Error::Parse("no component columns z_0..".into()));
    }
    for (i, h) in header.iter().take(c).enumerate() {
        if *h != format!("z_{i}") {
            return Err(Error::Parse(format!("expected column z_{i}, found `{h}`")));
        }
    }
    let (ti, si) = (column(&header, "target")?, column(&header, "split")?);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for row in &rows {
        let z = row[..c]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad component index `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let t = parse_num(&row[ti])?.ok_or_else(|| Error::Parse("missing target".into()))?;
        let ex = Example::new(CompInput(z), t);
        match parse_split(&row[si])? {
            Split::Train => train.push(ex),
            Split::Test => test.push(ex),
        }
    }
    let cards = match cardinalities {
        Some(c) => c,
        None => (0..c)
            .map(|i| train.iter().chain(&test).map(|e: &Example| e.input.0[i] + 1).max().unwrap_or(1))
            .collect(),
    };
    let kind = kind.unwrap_or_else(|| {
        if train.iter().chain(&test).all(|e| e.target == 1.0 || e.target == -1.0) {
            TaskKind::Classification
        } else {
            TaskKind::Regression
        }
    });
    CompositionalDataset::new(ComponentSpace::new(cards)?, train, test, kind)
}

// --- profiles and tables ---

fn write_indexed<W: Write>(w: W, values: &Indexing, size_offset: usize) -> Result<()> {
    match values {
        Indexing::BySize(v) => write_rows(
            w,
            &["overlap_size".into(), "value".into()],
            v.iter()
                .enumerate()
                .map(|(k, x)| vec![(k + size_offset).to_string(), fmt_num(*x)]),
        ),
        Indexing::ByConjunction(v) => write_rows(
            w,
            &["conjunction_mask".into(), "value".into()],
            v.iter()
                .enumerate()
                .skip(size_offset)
                .map(|(m, x)| vec![m.to_string(), fmt_num(*x)]),
        ),
    }
}

fn read_indexed<R: Read>(r: R) -> Result<(bool, Vec<(usize, f64)>)> {
    let (header, rows) = read_rows(r)?;
    let by_size = match header.first().map(String::as_str) {
        Some("overlap_size") => true,
        Some("conjunction_mask") => false,
        _ => return Err(Error::Parse("expected an overlap_size or conjunction_mask column".into())),
    };
    let vi = column(&header, "value")?;
    let entries = rows
        .iter()
        .map(|row| {
            let idx = row[0]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad index `{}`", row[0])))?;
            let v = parse_num(&row[vi])?.ok_or_else(|| Error::Parse("missing value".into()))?;
            Ok((idx, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((by_size, entries))
}

fn dense(entries: &[(usize, f64)], len: usize, offset: usize) -> Result<Vec<f64>> {
    let mut out = vec![None; len];
    for &(i, v) in entries {
        let slot = i
            .checked_sub(offset)
            .and_then(|j| out.get_mut(j))
            .ok_or_else(|| Error::Parse(format!("index {i} out of range")))?;
        *slot = Some(v);
    }
    out.into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| Error::Parse(format!("missing entry {}", j + offset))))
        .collect()
}

/// `overlap_size,value` rows for `k = 1..=C`, or `conjunction_mask,value`
/// rows for every non-empty mask.
pub fn write_profile<W: Write>(w: W, p: &SalienceProfile) -> Result<()> {
    write_indexed(w, p.indexing(), 1)
}

pub fn read_profile<R: Read>(r: R) -> Result<SalienceProfile> {
    let (by_size, entries) = read_indexed(r)?;
    let max = entries.iter().map(|e| e.0).max().unwrap_or(0);
    if by_size {
        SalienceProfile::uniform(dense(&entries, max, 1)?)
    } else {
        let c = (usize::BITS - max.leading_zeros()) as usize;
        let mut v = vec![0.0];
        v.extend(dense(&entries, (1 << c) - 1, 1)?);
        SalienceProfile::by_conjunction(c, v)
    }
}

/// `overlap_size,value` rows for `k = 0..=C`, or one row per mask.
pub fn write_table<W: Write>(w: W, t: &SimilarityTable) -> Result<()> {
    write_indexed(w, t.indexing(), 0)
}

pub fn read_table<R: Read>(r: R) -> Result<SimilarityTable> {
    let (by_size, entries) = read_indexed(r)?;
    let max = entries.iter().map(|e| e.0).max().unwrap_or(0);
    if by_size {
        SimilarityTable::by_size(dense(&entries, max + 1, 0)?)
    } else {
        let c = (usize::BITS - max.leading_zeros()) as usize;
        SimilarityTable::by_conjunction(c, dense(&entries, 1 << c, 0)?)
    }
}

fn profile_columns(p: &SalienceProfile) -> Vec<(String, f64)> {
    match p.indexing() {
        Indexing::BySize(v) => v.iter().enumerate().map(|(k, &s)| (format!("S_{}", k + 1), s)).collect(),
        Indexing::ByConjunction(v) => v
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &s)| (format!("S_mask{m}"), s))
            .collect(),
    }
}

/// One row per layer: `layer,S_1,…,S_C` (or one column per mask).
pub fn write_depth_trajectory<W: Write>(w: W, layers: &[SalienceProfile]) -> Result<()> {
    let Some(first) = layers.first() else {
        return write_rows(w, &["layer".into()], std::iter::empty());
    };
    let header: Vec<String> = std::iter::once("layer".to_string())
        .chain(profile_columns(first).into_iter().map(|c| c.0))
        .collect();
    write_rows(
        w,
        &header,
        layers.iter().enumerate().map(|(l, p)| {
            std::iter::once(l.to_string())
                .chain(profile_columns(p).into_iter().map(|c| fmt_num(c.1)))
                .collect()
        }),
    )
}

// --- predictions and analysis ---

pub fn write_predictions<W: Write>(w: W, report: &PredictionReport) -> Result<()> {
    let c = report.rows.first().map_or(0, |r| r.input.len());
    let header: Vec<String> = component_header(c)
        .chain(["split", "predicted", "truth", "margin", "squared_error"].map(String::from))
        .collect();
    write_rows(
        w,
        &header,
        report.rows.iter().map(|r| {
            component_fields(&r.input)
                .chain([
                    r.split.to_string(),
                    fmt_num(r.predicted),
                    fmt_num(r.truth),
                    fmt_opt(r.margin),
                    fmt_opt(r.squared_error),
                ])
                .collect()
        }),
    )
}

/// Reads `z_*` and `predicted` columns from a predictions file.
pub fn read_predictions<R: Read>(r: R) -> Result<Vec<(CompInput, f64)>> {
    let (header, rows) = read_rows(r)?;
    let c = header.iter().take_while(|h| h.starts_with("z_")).count();
    let pi = column(&header, "predicted")?;
    rows.iter()
        .map(|row| {
            let z = row[..c]
                .iter()
                .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad component index `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            let p = parse_num(&row[pi])?.ok_or_else(|| Error::Parse("missing prediction".into()))?;
            Ok((CompInput(z), p))
        })
        .collect()
}

fn join_values(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// `conjunction_mask,component_values,coefficient`; values are `;`-joined.
pub fn write_additivity<W: Write>(w: W, report: &AdditivityReport) -> Result<()> {
    write_rows(
        w,
        &["conjunction_mask", "component_values", "coefficient"].map(String::from),
        report
            .coefficients
            .iter()
            .map(|c| vec![c.conjunction.0.to_string(), join_values(&c.values), fmt_num(c.coefficient)]),
    )
}

pub fn write_additivity_summary<W: Write>(w: W, report: &AdditivityReport) -> Result<()> {
    let split = match report.split_used {
        crate::analysis::AdditivitySplit::TestOnly => "test_only",
        crate::analysis::AdditivitySplit::TrainAndTest => "train_and_test",
    };
    write_rows(
        w,
        &["r_squared", "feature_count", "split", "residual_ss", "total_ss", "intercept"].map(String::from),
        [vec![
            fmt_opt(report.r_squared),
            report.feature_count.to_string(),
            split.to_string(),
            fmt_num(report.residual_ss),
            fmt_num(report.total_ss),
            if report.intercept_dropped { "none" } else { "fit" }.to_string(),
        ]],
    )
}

/// Writes a matrix with an optional leading block of component columns.
pub fn write_matrix<W: Write>(w: W, prefix: &str, m: &nalgebra::DMatrix<f64>, inputs: Option<&[CompInput]>) -> Result<()> {
    let c = inputs.and_then(|i| i.first()).map_or(0, CompInput::len);
    let header: Vec<String> = component_header(c)
        .chain((0..m.ncols()).map(|j| format!("{prefix}_{j}")))
        .collect();
    write_rows(
        w,
        &header,
        (0..m.nrows()).map(|i| {
            let z = inputs.map(|inp| component_fields(&inp[i]).collect::<Vec<_>>()).unwrap_or_default();
            z.into_iter().chain(m.row(i).iter().map(|&x| fmt_num(x))).collect()
        }),
    )
}

/// Generic writer for already formatted rows.
pub fn write_table_rows<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(w, &header, rows)
}

/// Generic reader returning the header and raw fields.
pub fn read_table_rows<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    read_rows(r)
}

pub fn conjunction_label(j: Conjunction) -> String {
    format!("{j:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1e-13), "1e-13");
        assert_eq!(fmt_num(-1.234567890123456e-20), "-1.23456789012e-20");
        assert_eq!(fmt_num(0.00001), "0.00001");
        assert_eq!(fmt_num(f64::NAN), "NA");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn dataset_round_trip() {
        for d in [
            gen_context_dependence(CdVariant::Cd2),
            gen_symbolic_addition(&[-1.5, 0.0, 1.5], &[0.0]).unwrap(),
            gen_partial_exposure(),
        ] {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &d).unwrap();
            let back = read_dataset(buf.as_slice(), Some(d.space.cardinalities().to_vec()), None).unwrap();
            assert_eq!(back, d);
        }
        let text = "z_0,z_1,target,split\n0,0,1,train\n0,1,-1,test\n";
        let d = read_dataset(text.as_bytes(), None, None).unwrap();
        assert_eq!(d.kind, TaskKind::Classification);
        assert_eq!(d.space.cardinalities(), &[1, 2]);
        assert!(read_dataset("a,b\n1,2\n".as_bytes(), None, None).is_err());
        assert!(read_dataset("z_0,target,split\n0,1,valid\n".as_bytes(), None, None).is_err());
    }

    #[test]
    fn profile_and_table_round_trip() {
        let p = SalienceProfile::three_component(0.1, 0.12).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("overlap_size,value\n1,0.1\n"));
        let back = read_profile(buf.as_slice()).unwrap();
        for k in 1..=3 {
            assert!((back.size_salience(k) - p.size_salience(k)).abs() < 1e-11);
        }

        let t = crate::geometry::similarities_from_salience(&p).unwrap();
        let mut buf = Vec::new();
        write_table(&mut buf, &t).unwrap();
        let back = read_table(buf.as_slice()).unwrap();
        for j in Conjunction::all(3) {
            assert!((back.kappa(j) - t.kappa(j)).abs() < 1e-11);
        }

        let g = SalienceProfile::by_conjunction(2, vec![0.0, 0.3, 0.5, 0.2]).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &g).unwrap();
        assert_eq!(read_profile(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn depth_csv_has_one_row_per_layer() {
        let layers = crate::geometry::depth_salience(&SalienceProfile::multi_hot(3), 4, 0.0).unwrap();
        let mut buf = Vec::new();
        write_depth_trajectory(&mut buf, &layers).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "layer,S_1,S_2,S_3");
        assert_eq!(lines.len(), 6);
    }
}
