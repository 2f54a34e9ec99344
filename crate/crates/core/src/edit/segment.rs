//! Unit boundaries for the four selection granularities.

use super::Granularity;

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Start index of every unit, strictly increasing, always beginning with 0.
/// Empty text has the single boundary 0.
pub fn segment(text: &[char], granularity: Granularity) -> Vec<usize> {
    let n = text.len();
    if n == 0 {
        return vec![0];
    }
    let mut starts = vec![0];
    match granularity {
        Granularity::Character => starts.extend(1..n),
        Granularity::Word => {
            for i in 1..n {
                if !text[i].is_whitespace() && text[i - 1].is_whitespace() {
                    starts.push(i);
                }
            }
        }
        Granularity::Sentence => {
            let mut i = 0;
            while i < n {
                if !is_terminator(text[i]) {
                    i += 1;
                    continue;
                }
                let mut j = i;
                while j < n && is_terminator(text[j]) {
                    j += 1;
                }
                let ws = j;
                while j < n && text[j].is_whitespace() {
                    j += 1;
                }
                if j > ws && j < n {
                    starts.push(j);
                }
                i = j.max(i + 1);
            }
        }
        Granularity::Paragraph => {
            let mut i = 0;
            while i < n {
                if !text[i].is_whitespace() {
                    i += 1;
                    continue;
                }
                let mut j = i;
                let mut breaks = 0;
                while j < n && text[j].is_whitespace() {
                    breaks += (text[j] == '\n') as usize;
                    j += 1;
                }
                if breaks >= 2 && j < n {
                    starts.push(j);
                }
                i = j;
            }
        }
    }
    starts.dedup();
    starts
}

/// Positions the caret can rest on: unit starts plus the end of text.
pub fn caret_stops(text: &[char], granularity: Granularity) -> Vec<usize> {
    let mut stops = segment(text, granularity);
    if *stops.last().unwrap() != text.len() {
        stops.push(text.len());
    }
    stops
}

/// Positions a selection head can reach moving forward. Sentences and
/// paragraphs end after their last non-whitespace character; characters
/// and words use the caret stops.
pub fn forward_stops(text: &[char], granularity: Granularity) -> Vec<usize> {
    match granularity {
        Granularity::Character | Granularity::Word => caret_stops(text, granularity),
        Granularity::Sentence | Granularity::Paragraph => {
            let starts = segment(text, granularity);
            let mut stops = Vec::with_capacity(starts.len());
            for (k, &s) in starts.iter().enumerate() {
                let mut end = starts.get(k + 1).copied().unwrap_or(text.len());
                while end > s && text[end - 1].is_whitespace() {
                    end -= 1;
                }
                stops.push(end);
            }
            stops.dedup();
            stops
        }
    }
}
