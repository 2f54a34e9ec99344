//! Text document model driven by gesture commands.

pub mod binding;
pub mod handpose;
pub mod log;
pub mod segment;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binding::{bind_event, swipe_delta, EditorContext, SwipeMapping};
pub use handpose::{detect_pinch_hold, mode_switch_step, MenuPhase, ModeSwitchState, PinchHoldDetector};
pub use log::{parse_log, replay, write_log, LogError, LogRecord};
pub use segment::{caret_stops, forward_stops, segment};

/// Maximum number of undo snapshots kept.
pub const UNDO_DEPTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Character,
    Word,
    Sentence,
    Paragraph,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Character,
        Granularity::Word,
        Granularity::Sentence,
        Granularity::Paragraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Character => "Character",
            Granularity::Word => "Word",
            Granularity::Sentence => "Sentence",
            Granularity::Paragraph => "Paragraph",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `head` is always the caret; `anchor != head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub anchor: usize,
    pub head: usize,
}

impl Selection {
    pub fn start(&self) -> usize {
        self.anchor.min(self.head)
    }

    pub fn end(&self) -> usize {
        self.anchor.max(self.head)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub text: Vec<char>,
    pub caret: usize,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditCommand {
    MoveCaret(i64),
    SelectRange(i64),
    Cut,
    Copy,
    Paste,
    Undo,
    Delete,
    SelectAll,
    SetGranularity(Granularity),
    ConfirmCaret,
    ResetTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("command needs a selection")]
    NoSelection,
    #[error("clipboard is empty")]
    EmptyClipboard,
    #[error("nothing to undo")]
    UndoStackEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    text: Vec<char>,
    caret: usize,
    selection: Option<Selection>,
    granularity: Granularity,
    clipboard: Vec<char>,
    undo: VecDeque<Snapshot>,
    initial: Snapshot,
}

impl Document {
    pub fn new(text: &str) -> Self {
        let text: Vec<char> = text.chars().collect();
        let initial = Snapshot {
            text: text.clone(),
            caret: 0,
            selection: None,
        };
        Self {
            text,
            caret: 0,
            selection: None,
            granularity: Granularity::Character,
            clipboard: Vec::new(),
            undo: VecDeque::new(),
            initial,
        }
    }

    /// A task document: `text` with the caret at `caret` (clamped). The
    /// initial state is what ResetTask returns to.
    pub fn with_caret(text: &str, caret: usize) -> Self {
        let mut d = Self::new(text);
        d.caret = caret.min(d.text.len());
        d.initial.caret = d.caret;
        d
    }

    pub fn text(&self) -> String {
        self.text.iter().collect()
    }

    pub fn chars(&self) -> &[char] {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn caret(&self) -> usize {
        self.caret
    }

    pub fn selection(&self) -> Option<Selection> {
        self.selection
    }

    pub fn selected_text(&self) -> Option<String> {
        self.selection.map(|s| self.text[s.start()..s.end()].iter().collect())
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn clipboard(&self) -> String {
        self.clipboard.iter().collect()
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            text: self.text.clone(),
            caret: self.caret,
            selection: self.selection,
        }
    }

    /// True if caret and selection are inside the text and the selection
    /// is non-empty with its head on the caret.
    pub fn invariants_hold(&self) -> bool {
        let n = self.text.len();
        self.caret <= n
            && self.undo.len() <= UNDO_DEPTH
            && self
                .selection
                .is_none_or(|s| s.anchor <= n && s.head <= n && s.anchor != s.head && s.head == self.caret)
    }

    fn push_undo(&mut self) {
        if self.undo.len() == UNDO_DEPTH {
            self.undo.pop_front();
        }
        self.undo.push_back(self.snapshot());
    }

    fn restore(&mut self, s: Snapshot) {
        self.text = s.text;
        self.caret = s.caret;
        self.selection = s.selection;
    }

    fn remove_selection(&mut self, sel: Selection) {
        self.text.drain(sel.start()..sel.end());
        self.caret = sel.start();
        self.selection = None;
    }
}

fn step_forward(stops: &[usize], from: usize, n: u64) -> usize {
    let mut pos = from;
    for _ in 0..n {
        match stops.iter().find(|&&s| s > pos) {
            Some(&s) => pos = s,
            None => break,
        }
    }
    pos
}

fn step_backward(stops: &[usize], from: usize, n: u64) -> usize {
    let mut pos = from;
    for _ in 0..n {
        match stops.iter().rev().find(|&&s| s < pos) {
            Some(&s) => pos = s,
            None => break,
        }
    }
    pos
}

/// Moves the caret `delta` units of `granularity`, clamped to the text.
/// Collapses any selection.
pub fn move_caret(doc: &Document, delta: i64, granularity: Granularity) -> Document {
    let mut d = doc.clone();
    if delta == 0 {
        return d;
    }
    let stops = caret_stops(&d.text, granularity);
    d.caret = if delta > 0 {
        step_forward(&stops, d.caret, delta.unsigned_abs())
    } else {
        step_backward(&stops, d.caret, delta.unsigned_abs())
    };
    d.selection = None;
    d
}

fn select_range(doc: &mut Document, delta: i64) {
    if delta == 0 {
        return;
    }
    let g = doc.granularity;
    let starts = segment(&doc.text, g);
    let fwd = forward_stops(&doc.text, g);
    let anchor = match doc.selection {
        Some(s) => s.anchor,
        // snap outward to the unit containing the caret
        None if delta > 0 => *starts.iter().rev().find(|&&s| s <= doc.caret).unwrap_or(&0),
        None => *fwd.iter().find(|&&s| s >= doc.caret).unwrap_or(&doc.caret),
    };
    let from = doc.selection.map_or(doc.caret, |s| s.head);
    let head = if delta > 0 {
        step_forward(&fwd, from, delta.unsigned_abs())
    } else {
        step_backward(&starts, from, delta.unsigned_abs())
    };
    doc.caret = head;
    doc.selection = (head != anchor).then_some(Selection { anchor, head });
}

/// Applies one command. On error the document is unchanged. Every
/// successful command except Undo and ResetTask first records an undo
/// snapshot of (text, caret, selection).
pub fn apply(doc: &Document, cmd: EditCommand) -> Result<Document, EditError> {
    let mut d = doc.clone();
    match cmd {
        EditCommand::Undo => {
            let s = d.undo.pop_back().ok_or(EditError::UndoStackEmpty)?;
            d.restore(s);
            return Ok(d);
        }
        EditCommand::ResetTask => {
            let initial = d.initial.clone();
            d.restore(initial);
            d.undo.clear();
            return Ok(d);
        }
        EditCommand::Cut | EditCommand::Copy | EditCommand::Delete if d.selection.is_none() => {
            return Err(EditError::NoSelection);
        }
        EditCommand::Paste if d.clipboard.is_empty() => return Err(EditError::EmptyClipboard),
        _ => {}
    }
    d.push_undo();
    match cmd {
        EditCommand::MoveCaret(delta) => {
            let g = d.granularity;
            let moved = move_caret(&d, delta, g);
            d.caret = moved.caret;
            d.selection = moved.selection;
        }
        EditCommand::SelectRange(delta) => select_range(&mut d, delta),
        EditCommand::Copy => {
            let s = d.selection.expect("checked above");
            d.clipboard = d.text[s.start()..s.end()].to_vec();
        }
        EditCommand::Cut => {
            let s = d.selection.expect("checked above");
            d.clipboard = d.text[s.start()..s.end()].to_vec();
            d.remove_selection(s);
        }
        EditCommand::Delete => {
            let s = d.selection.expect("checked above");
            d.remove_selection(s);
        }
        EditCommand::Paste => {
            if let Some(s) = d.selection {
                d.remove_selection(s);
            }
            let at = d.caret;
            let clip = d.clipboard.clone();
            d.text.splice(at..at, clip.iter().copied());
            d.caret = at + clip.len();
        }
        EditCommand::SelectAll => {
            let n = d.text.len();
            d.caret = n;
            d.selection = (n > 0).then_some(Selection { anchor: 0, head: n });
        }
        EditCommand::SetGranularity(g) => d.granularity = g,
        EditCommand::ConfirmCaret => {}
        EditCommand::Undo | EditCommand::ResetTask => unreachable!(),
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn select(doc: &Document, anchor: usize, head: usize) -> Document {
        let mut d = doc.clone();
        d.caret = head;
        d.selection = Some(Selection { anchor, head });
        d
    }

    #[test]
    fn cut_example() {
        let d = select(&Document::new("abc"), 0, 2);
        let d = apply(&d, EditCommand::Cut).unwrap();
        assert_eq!(d.text(), "c");
        assert_eq!(d.clipboard(), "ab");
        assert_eq!(d.caret(), 0);
        assert_eq!(d.selection(), None);
    }

    #[test]
    fn move_caret_by_word() {
        let d = Document::new("hello world");
        assert_eq!(move_caret(&d, 1, Granularity::Word).caret(), 6);
        assert_eq!(move_caret(&d, 0, Granularity::Word), d);
        let end = Document::with_caret("hello world", 11);
        assert_eq!(move_caret(&end, 3, Granularity::Sentence).caret(), 11);
        assert_eq!(move_caret(&end, -1, Granularity::Word).caret(), 6);
        assert_eq!(move_caret(&end, -9, Granularity::Word).caret(), 0);
    }

    #[test]
    fn errors_leave_document_unchanged() {
        let d = Document::new("abc");
        assert_eq!(apply(&d, EditCommand::Cut), Err(EditError::NoSelection));
        assert_eq!(apply(&d, EditCommand::Copy), Err(EditError::NoSelection));
        assert_eq!(apply(&d, EditCommand::Delete), Err(EditError::NoSelection));
        assert_eq!(apply(&d, EditCommand::Paste), Err(EditError::EmptyClipboard));
        assert_eq!(apply(&d, EditCommand::Undo), Err(EditError::UndoStackEmpty));
    }

    #[test]
    fn select_range_snaps_to_units() {
        let d = apply(&Document::with_caret("One. Two!  Three", 6), EditCommand::SetGranularity(Granularity::Sentence)).unwrap();
        let f = apply(&d, EditCommand::SelectRange(1)).unwrap();
        assert_eq!(f.selection(), Some(Selection { anchor: 5, head: 9 }));
        assert_eq!(f.selected_text().unwrap(), "Two!");
        let f2 = apply(&f, EditCommand::SelectRange(1)).unwrap();
        assert_eq!(f2.selected_text().unwrap(), "Two!  Three");
        let b = apply(&d, EditCommand::SelectRange(-1)).unwrap();
        assert_eq!(b.selection(), Some(Selection { anchor: 9, head: 5 }));
        // shrinking back to the anchor clears the selection
        let back = apply(&f, EditCommand::SelectRange(-1)).unwrap();
        assert_eq!(back.selection(), None);
        assert_eq!(back.caret(), 5);
    }

    #[test]
    fn paste_replaces_selection() {
        let d = select(&Document::new("hello world"), 0, 5);
        let d = apply(&d, EditCommand::Copy).unwrap();
        let d = select(&d, 6, 11);
        let d = apply(&d, EditCommand::Paste).unwrap();
        assert_eq!(d.text(), "hello hello");
        assert_eq!(d.caret(), 11);
        assert!(d.invariants_hold());
    }

    #[test]
    fn undo_depth_is_bounded_and_reset_restores() {
        let mut d = Document::with_caret("abc def", 2);
        for _ in 0..150 {
            d = apply(&d, EditCommand::MoveCaret(1)).unwrap();
        }
        assert_eq!(d.undo_depth(), UNDO_DEPTH);
        d = apply(&d, EditCommand::SelectAll).unwrap();
        d = apply(&d, EditCommand::Copy).unwrap();
        d = apply(&d, EditCommand::Delete).unwrap();
        let r = apply(&d, EditCommand::ResetTask).unwrap();
        assert_eq!(r.text(), "abc def");
        assert_eq!(r.caret(), 2);
        assert_eq!(r.undo_depth(), 0);
        assert_eq!(r.clipboard(), "abc def");
    }

    #[test]
    fn select_all_on_empty_text_has_no_selection() {
        let d = apply(&Document::new(""), EditCommand::SelectAll).unwrap();
        assert_eq!(d.selection(), None);
        let d = apply(&Document::new("ab"), EditCommand::SelectAll).unwrap();
        assert_eq!(d.selection(), Some(Selection { anchor: 0, head: 2 }));
    }
}
