use serde::{Deserialize, Serialize};

pub const PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

/// Percentile with linear interpolation between closest ranks
/// (`h = (n-1)·q`), on already-sorted data.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of an empty sample");
    let h = (n - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Band {
    pub fn from_values(values: &[f64]) -> Option<Band> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let [p5, p25, p50, p75, p95] = PERCENTILES.map(|q| percentile_sorted(&v, q));
        Some(Band { p5, p25, p50, p75, p95 })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p5, self.p25, self.p50, self.p75, self.p95]
    }
}

/// One metric across lens stages. `None` entries in `values` are undefined
/// measurements and never enter the bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub stages: Vec<i32>,
    pub values: Vec<Vec<Option<f64>>>,
    /// `None` marks a stage where every value was undefined.
    pub bands: Vec<Option<Band>>,
    pub counts: Vec<usize>,
}

impl MetricSeries {
    pub fn empty_stages(&self) -> Vec<i32> {
        self.stages
            .iter()
            .zip(&self.bands)
            .filter(|(_, b)| b.is_none())
            .map(|(&s, _)| s)
            .collect()
    }

    /// `stage,p5,p25,p50,p75,p95,n`; empty stages leave the band cells blank.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["stage", "p5", "p25", "p50", "p75", "p95", "n"])
            .expect("in-memory write");
        for ((stage, band), n) in self.stages.iter().zip(&self.bands).zip(&self.counts) {
            let mut rec = vec![stage.to_string()];
            match band {
                Some(b) => rec.extend(b.as_array().iter().map(|x| x.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
            rec.push(n.to_string());
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
    }
}

pub fn percentile_bands(name: &str, stages: Vec<i32>, values: Vec<Vec<Option<f64>>>) -> MetricSeries {
    assert_eq!(stages.len(), values.len(), "one value list per stage");
    let mut bands = Vec::with_capacity(values.len());
    let mut counts = Vec::with_capacity(values.len());
    for vals in &values {
        let defined: Vec<f64> = vals.iter().flatten().copied().collect();
        counts.push(defined.iter().filter(|x| x.is_finite()).count());
        bands.push(Band::from_values(&defined));
    }
    MetricSeries {
        name: name.to_string(),
        stages,
        values,
        bands,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let b = Band::from_values(&[3.25; 7]).unwrap();
        assert_eq!(b.as_array(), [3.25; 5]);
        let b = Band::from_values(&[-0.5]).unwrap();
        assert_eq!(b.as_array(), [-0.5; 5]);

        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let b = Band::from_values(&v).unwrap();
        assert_eq!(b.p50, 50.5);
        // h = 99·0.05 = 4.95 → 5 + 0.95·1
        assert!((b.p5 - 5.95).abs() <= 1e-12);
        assert!((b.p95 - 95.05).abs() <= 1e-12);
    }

    #[test]
    fn undefined_values_are_dropped() {
        let s = percentile_bands(
            "tau",
            vec![-1, 0],
            vec![vec![None, None], vec![Some(1.0), None, Some(3.0)]],
        );
        assert_eq!(s.bands[0], None);
        assert_eq!(s.empty_stages(), vec![-1]);
        assert_eq!(s.counts, vec![0, 2]);
        assert_eq!(s.bands[1].unwrap().p50, 2.0);
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "stage,p5,p25,p50,p75,p95,n");
        assert_eq!(lines[1], "-1,,,,,,0");
        assert!(lines[2].starts_with("0,1.1,1.5,2,2.5,"));
    }

    proptest! {
        #[test]
        fn bands_are_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let b = Band::from_values(&v).unwrap().as_array();
            prop_assert!(b.windows(2).all(|w| w[0] <= w[1]));
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= b[0] && b[4] <= hi);
        }
    }
}
