//! Selection of rising (low-to-high) stretches of a network series by the
//! giant-component fraction or the edge density.
//!
//! Inside the window, the curve is cut at anchors: the first point at or
//! below the lower quartile, then repeatedly the point reached by growing
//! until the upper quartile is met and then until the curve drops back to
//! the lower quartile. Each stretch between consecutive anchors has its
//! tail trimmed back to the last point at or above the upper quartile.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::NetworkSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("window start {start} is not before its end {end}")]
    InvalidRoi { start: f64, end: f64 },
    #[error("no observation falls inside the window")]
    RoiEmpty,
    #[error("need at least 4 points inside the window, got {0}")]
    TooFewPoints(usize),
    #[error("lower and upper quartiles coincide ({0})")]
    DegenerateQuartiles(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Gcc,
    Density,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcc" => Ok(Metric::Gcc),
            "density" => Ok(Metric::Density),
            other => Err(format!("unknown metric {other:?} (expected gcc or density)")),
        }
    }
}

/// Closed time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub start: f64,
    pub end: f64,
}

impl Roi {
    pub fn new(start: f64, end: f64) -> Result<Self, SegmentError> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(SegmentError::InvalidRoi { start, end })
        }
    }

    /// First and last series indices inside the window.
    pub fn window(&self, times: &[f64]) -> Result<(usize, usize), SegmentError> {
        let inside = |t: &f64| *t >= self.start && *t <= self.end;
        let l = times.iter().position(inside).ok_or(SegmentError::RoiEmpty)?;
        let r = times.iter().rposition(inside).ok_or(SegmentError::RoiEmpty)?;
        Ok((l, r))
    }
}

/// Index range `[start, end]` (0-based, inclusive) into the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = prob * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Segments of `curve[l..=r]`, with indices into `curve`.
pub fn find_segments_in_curve(curve: &[f64], l: usize, r: usize) -> Result<Vec<Segment>, SegmentError> {
    if r >= curve.len() || l > r {
        return Err(SegmentError::RoiEmpty);
    }
    let window = &curve[l..=r];
    if window.len() < 4 {
        return Err(SegmentError::TooFewPoints(window.len()));
    }
    let q1 = quantile(window, 0.25);
    let q3 = quantile(window, 0.75);
    if q1 == q3 {
        return Err(SegmentError::DegenerateQuartiles(q1));
    }

    let mut anchor = l;
    while anchor <= r && curve[anchor] > q1 {
        anchor += 1;
    }
    if anchor > r {
        anchor = l;
    }
    let mut anchors = vec![anchor];
    while anchor < r {
        let mut i = 1;
        while curve[anchor + i] < q3 && anchor + i < r {
            i += 1;
        }
        while curve[anchor + i] > q1 && anchor + i < r {
            i += 1;
        }
        anchor += i;
        anchors.push(anchor);
    }

    let mut out = Vec::new();
    for pair in anchors.windows(2) {
        let a = pair[0];
        let mut b = pair[1];
        while b > a && curve[b] < q3 {
            b -= 1;
        }
        if b > a && curve[b] >= q3 {
            out.push(Segment { start: a, end: b });
        }
    }
    Ok(out)
}

pub fn metric_curve(series: &NetworkSeries, metric: Metric) -> Vec<f64> {
    match metric {
        Metric::Gcc => series.gcc_curve(),
        Metric::Density => series.density_curve(),
    }
}

pub fn find_segments(series: &NetworkSeries, roi: &Roi, metric: Metric) -> Result<Vec<Segment>, SegmentError> {
    let (l, r) = roi.window(series.times())?;
    find_segments_in_curve(&metric_curve(series, metric), l, r)
}

/// Non-empty pairwise overlaps of two segment lists.
pub fn intersect_segment_lists(a: &[Segment], b: &[Segment]) -> Vec<Segment> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let start = x.start.max(y.start);
            let end = x.end.min(y.end);
            if start < end {
                out.push(Segment { start, end });
            }
        }
    }
    out.sort_by_key(|s| (s.start, s.end));
    out.dedup();
    out
}

/// Overlaps of the segments found under both metrics.
pub fn intersect_segments(series: &NetworkSeries, roi: &Roi) -> Result<Vec<Segment>, SegmentError> {
    let gcc = find_segments(series, roi, Metric::Gcc)?;
    let density = find_segments(series, roi, Metric::Density)?;
    Ok(intersect_segment_lists(&gcc, &density))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;
    use proptest::prelude::*;

    fn seg(start: usize, end: usize) -> Segment {
        Segment { start, end }
    }

    #[test]
    fn quartiles_interpolate() {
        let v = [0., 0., 1., 3., 8., 9., 4., 1., 0., 2., 7., 9., 3.];
        assert_eq!(quantile(&v, 0.25), 1.0);
        assert_eq!(quantile(&v, 0.75), 7.0);
        assert_eq!(quantile(&[1., 2., 3., 4.], 0.25), 1.75);
    }

    #[test]
    fn traced_example() {
        let v = [0., 0., 1., 3., 8., 9., 4., 1., 0., 2., 7., 9., 3.];
        assert_eq!(find_segments_in_curve(&v, 0, 12).unwrap(), vec![seg(0, 5), seg(7, 11)]);
    }

    #[test]
    fn monotone_and_constant() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(find_segments_in_curve(&v, 0, 9).unwrap(), vec![seg(0, 9)]);
        assert_eq!(
            find_segments_in_curve(&[0.4; 8], 0, 7),
            Err(SegmentError::DegenerateQuartiles(0.4))
        );
        assert_eq!(find_segments_in_curve(&[1., 2., 3.], 0, 2), Err(SegmentError::TooFewPoints(3)));
    }

    #[test]
    fn list_intersections() {
        let a = [seg(10, 30)];
        assert_eq!(intersect_segment_lists(&a, &[seg(20, 40)]), vec![seg(20, 30)]);
        assert_eq!(intersect_segment_lists(&a, &a), a.to_vec());
        assert!(intersect_segment_lists(&a, &[seg(31, 40)]).is_empty());
    }

    #[test]
    fn window_selection() {
        let roi = Roi::new(1.5, 4.0).unwrap();
        assert_eq!(roi.window(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), (1, 3));
        assert_eq!(Roi::new(2.0, 3.0).unwrap().window(&[1.0, 4.0]), Err(SegmentError::RoiEmpty));
        assert!(Roi::new(3.0, 3.0).is_err());
    }

    #[test]
    fn series_metrics() {
        let graphs: Vec<DynGraph> = (0..6)
            .map(|k| DynGraph::from_edges(4, (0..k.min(3)).map(|i| (i, i + 1))).unwrap())
            .collect();
        let s = NetworkSeries::new((1..=6).map(f64::from).collect(), graphs).unwrap();
        let roi = Roi::new(0.0, 10.0).unwrap();
        let gcc = find_segments(&s, &roi, Metric::Gcc).unwrap();
        let both = intersect_segments(&s, &roi).unwrap();
        assert_eq!(gcc, vec![seg(0, 5)]);
        assert_eq!(both, gcc);
    }

    proptest! {
        #[test]
        fn segments_are_ordered_and_end_high(v in prop::collection::vec(0u8..20, 4..60)) {
            let curve: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            if let Ok(segs) = find_segments_in_curve(&curve, 0, curve.len() - 1) {
                let q3 = quantile(&curve, 0.75);
                for s in &segs {
                    prop_assert!(s.start < s.end);
                    prop_assert!(curve[s.end] >= q3);
                }
                for w in segs.windows(2) {
                    prop_assert!(w[0].end <= w[1].start);
                }
                prop_assert_eq!(find_segments_in_curve(&curve, 0, curve.len() - 1).unwrap(), segs);
            }
        }
    }
}
