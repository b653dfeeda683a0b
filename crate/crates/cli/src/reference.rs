//! Bundled reference data: equivalent-filter tables of published device
//! pairs and the PAM-2 sensitivity anchors used for penalties.

use std::sync::OnceLock;

const TABLES_CSV: &str = include_str!("../data/reference_tables.csv");
const S0_CSV: &str = include_str!("../data/s0_anchors.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    /// 1: 10G-class device pairs, 2: 25G-class.
    pub table: u8,
    pub case: u8,
    /// `None` when only the combined response is known.
    pub tx_f3db_ghz: Option<f64>,
    pub rx_f3db_ghz: Option<f64>,
    pub rb_gbps: f64,
    pub b3db_pct: f64,
    pub b20db_pct: f64,
}

#[derive(Debug, Clone)]
pub struct ReferenceData {
    pub rows: Vec<TableRow>,
    /// `(rb_gbps, s0_dbm)`
    pub s0: Vec<(f64, f64)>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn opt(field: &str) -> Option<f64> {
    field.parse().ok()
}

fn parse(tables: &str, s0: &str) -> Result<ReferenceData, String> {
    let mut rows = Vec::new();
    for rec in reader(tables).records() {
        let r = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| -> Result<f64, String> {
            r.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("bad field {i} in {r:?}"))
        };
        rows.push(TableRow {
            table: num(0)? as u8,
            case: num(1)? as u8,
            tx_f3db_ghz: r.get(2).and_then(opt),
            rx_f3db_ghz: r.get(3).and_then(opt),
            rb_gbps: num(4)?,
            b3db_pct: num(5)?,
            b20db_pct: num(6)?,
        });
    }
    let mut anchors = Vec::new();
    for rec in reader(s0).records() {
        let r = rec.map_err(|e| e.to_string())?;
        let pair = (r.get(0).and_then(opt), r.get(1).and_then(opt));
        match pair {
            (Some(rb), Some(s)) => anchors.push((rb, s)),
            _ => return Err(format!("bad anchor row {r:?}")),
        }
    }
    Ok(ReferenceData { rows, s0: anchors })
}

/// The data compiled into the binary.
pub fn bundled() -> &'static ReferenceData {
    static DATA: OnceLock<ReferenceData> = OnceLock::new();
    DATA.get_or_init(|| parse(TABLES_CSV, S0_CSV).expect("bundled reference data is well-formed"))
}

impl ReferenceData {
    pub fn s0_dbm(&self, rb_gbps: f64) -> Option<f64> {
        self.s0.iter().find(|(rb, _)| *rb == rb_gbps).map(|(_, s)| *s)
    }

    pub fn table(&self, table: u8) -> impl Iterator<Item = &TableRow> {
        self.rows.iter().filter(move |r| r.table == table)
    }

    /// The bundled tables in their CSV form.
    pub fn tables_csv() -> &'static str {
        TABLES_CSV
    }
}

/// Grid value closest to `x`; ties go to the lower value.
pub fn nearest(grid: &[f64], x: f64) -> Option<f64> {
    grid.iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()).then(a.total_cmp(b)))
}
