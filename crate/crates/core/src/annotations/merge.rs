//! Grouping raw melody lines into paragraphs that resemble a reference
//! lyrics text, and grading how well a grouping matches.

use serde::Serialize;

use super::{AlignedSegment, Granularity, GranularityLevel};
use crate::error::{Error, Result};
use crate::text::str_similarity;

/// Paragraph level produced by [`merge_paragraphs`] together with the
/// input lines re-linked to their new paragraphs.
#[derive(Debug, Clone)]
pub struct MergedParagraphs {
    pub paragraphs: GranularityLevel,
    pub lines: GranularityLevel,
}

fn join_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    lines.into_iter().collect::<Vec<_>>().join(" ")
}

struct Targets(Vec<String>);

impl Targets {
    fn best(&self, text: &str) -> f64 {
        self.0
            .iter()
            .map(|t| str_similarity(text, t))
            .fold(0.0, f64::max)
    }
}

/// Greedily groups consecutive lines into paragraphs.
///
/// A paragraph grows while adding the next line does not lower its best
/// similarity to any target paragraph; if it would, the next two lines are
/// tried together before closing the paragraph. Lines with no counterpart
/// in the target end up in paragraphs of their own.
pub fn merge_paragraphs(
    melody_lines: &GranularityLevel,
    target_paragraphs: &[Vec<String>],
) -> Result<MergedParagraphs> {
    let lines = &melody_lines.segments;
    if lines.is_empty() {
        return Err(Error::param("merge_paragraphs needs at least one line"));
    }
    let groups: Vec<Vec<usize>> = if target_paragraphs.is_empty() {
        vec![(0..lines.len()).collect()]
    } else {
        let targets = Targets(
            target_paragraphs
                .iter()
                .map(|p| join_lines(p.iter().map(String::as_str)))
                .collect(),
        );
        let text = |idx: &[usize]| join_lines(idx.iter().map(|&i| lines[i].text.as_str()));
        let mut groups = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            let mut cur = vec![i];
            let mut next = i + 1;
            let mut score = targets.best(&text(&cur));
            loop {
                if next < lines.len() {
                    let mut one = cur.clone();
                    one.push(next);
                    let s1 = targets.best(&text(&one));
                    if s1 >= score {
                        cur = one;
                        score = s1;
                        next += 1;
                        continue;
                    }
                    if next + 1 < lines.len() {
                        let mut two = one;
                        two.push(next + 1);
                        let s2 = targets.best(&text(&two));
                        if s2 > score {
                            cur = two;
                            score = s2;
                            next += 2;
                            continue;
                        }
                    }
                }
                break;
            }
            groups.push(cur);
            i = next;
        }
        groups
    };

    let mut new_lines = melody_lines.clone();
    let paragraphs = groups
        .iter()
        .enumerate()
        .map(|(p, members)| {
            for &m in members {
                new_lines.segments[m].parent_index = Some(p);
            }
            let t0 = members.iter().map(|&m| lines[m].t0).fold(f64::INFINITY, f64::min);
            let t1 = members.iter().map(|&m| lines[m].t1).fold(f64::NEG_INFINITY, f64::max);
            AlignedSegment::span(t0, t1, join_lines(members.iter().map(|&m| lines[m].text.as_str())))
        })
        .collect();
    Ok(MergedParagraphs {
        paragraphs: GranularityLevel::new(Granularity::Paragraphs, paragraphs),
        lines: new_lines,
    })
}

/// `min` over merged paragraphs of the `max` similarity to any target paragraph.
pub fn merge_score(dali_paragraphs: &[String], target_paragraphs: &[String]) -> Result<f64> {
    if dali_paragraphs.is_empty() || target_paragraphs.is_empty() {
        return Err(Error::param("merge_score needs non-empty paragraph lists"));
    }
    let targets = Targets(target_paragraphs.to_vec());
    Ok(dali_paragraphs
        .iter()
        .map(|d| targets.best(d))
        .fold(f64::INFINITY, f64::min))
}

/// Merge-quality class of a song.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MergeClass {
    /// score in [0.90, 1.0]
    #[serde(rename = "M+")]
    High,
    /// score in [0.52, 0.90)
    #[serde(rename = "M0")]
    Medium,
    /// score in [0, 0.52)
    #[serde(rename = "M-")]
    Low,
}

impl MergeClass {
    pub fn label(self) -> &'static str {
        match self {
            MergeClass::High => "M+",
            MergeClass::Medium => "M0",
            MergeClass::Low => "M-",
        }
    }
}

/// Assigns each merge score to its class; shared endpoints go to the upper class.
pub fn partition_by_merge(scores: &[f64]) -> Vec<MergeClass> {
    scores
        .iter()
        .map(|&s| {
            if s >= 0.90 {
                MergeClass::High
            } else if s >= 0.52 {
                MergeClass::Medium
            } else {
                MergeClass::Low
            }
        })
        .collect()
}
