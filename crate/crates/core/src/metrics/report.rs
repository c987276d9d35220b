//! Machine-readable metric tables.

use indexmap::IndexMap;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

/// JSON has no infinities, so non-finite values become the strings `"inf"`, `"-inf"`, `"nan"`.
fn value_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_nan() {
        serde_json::json!("nan")
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

fn metrics_ser<S: Serializer>(m: &IndexMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &value_json(*v))?;
    }
    map.end()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    #[serde(serialize_with = "metrics_ser")]
    pub metrics: IndexMap<String, f64>,
}

/// Per-item rows plus column means.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
    #[serde(serialize_with = "metrics_ser")]
    pub mean: IndexMap<String, f64>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, metrics: IndexMap<String, f64>) {
        self.rows.push(ReportRow {
            name: name.into(),
            metrics,
        });
        self.recompute_mean();
    }

    fn recompute_mean(&mut self) {
        let mut sums: IndexMap<String, (f64, usize)> = IndexMap::new();
        for row in &self.rows {
            for (k, v) in &row.metrics {
                let e = sums.entry(k.clone()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        self.mean = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per row and a final `mean` line; columns in first-seen order.
    pub fn to_csv(&self) -> String {
        let cols: Vec<&String> = self.mean.keys().collect();
        let mut s = String::from("name");
        for c in &cols {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        let mut line = |name: &str, m: &IndexMap<String, f64>| {
            s.push_str(name);
            for c in &cols {
                s.push(',');
                if let Some(v) = m.get(*c) {
                    s.push_str(&v.to_string());
                }
            }
            s.push('\n');
        };
        for r in &self.rows {
            line(&r.name, &r.metrics);
        }
        line("mean", &self.mean);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_and_json() {
        let mut r = MetricReport::new();
        r.push("a", IndexMap::from([("psnr".to_string(), f64::INFINITY), ("ssim".to_string(), 1.0)]));
        r.push("b", IndexMap::from([("psnr".to_string(), 30.0), ("ssim".to_string(), 0.5)]));
        assert_eq!(r.mean["ssim"], 0.75);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["rows"][0]["metrics"]["psnr"], "inf");
        assert_eq!(v["mean"]["psnr"], "inf");
        assert_eq!(r.to_csv(), "name,psnr,ssim\na,inf,1\nb,30,0.5\nmean,inf,0.75\n");
    }
}
