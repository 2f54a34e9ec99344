//! Naive reference editor and the seeded fuzz that compares it with
//! `microgext::edit` state by state.
//!
//! Unit boundaries are decided per index from local predicates instead of
//! the library's scanning segmenter, and undo keeps whole copies.

use microgext::edit::{apply, Document, EditCommand, EditError, Granularity, Selection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEPTH: usize = 100;

fn ws(c: char) -> bool {
    c.is_whitespace()
}

fn term(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Is `i` (0 <= i < len) the first index of a unit?
fn is_start(t: &[char], i: usize, g: Granularity) -> bool {
    if i == 0 {
        return true;
    }
    if i >= t.len() {
        return false;
    }
    match g {
        Granularity::Character => true,
        Granularity::Word => !ws(t[i]) && ws(t[i - 1]),
        Granularity::Sentence => {
            if ws(t[i]) {
                return false;
            }
            // some whitespace, preceded by a terminator
            let mut j = i;
            while j > 0 && ws(t[j - 1]) {
                j -= 1;
            }
            j < i && j > 0 && term(t[j - 1])
        }
        Granularity::Paragraph => {
            if ws(t[i]) {
                return false;
            }
            let mut j = i;
            let mut breaks = 0;
            while j > 0 && ws(t[j - 1]) {
                j -= 1;
                breaks += (t[j] == '\n') as usize;
            }
            breaks >= 2
        }
    }
}

fn starts(t: &[char], g: Granularity) -> Vec<usize> {
    let mut v: Vec<usize> = (0..t.len().max(1)).filter(|&i| is_start(t, i, g)).collect();
    if v.is_empty() {
        v.push(0);
    }
    v
}

fn caret_stops(t: &[char], g: Granularity) -> Vec<usize> {
    let mut v = starts(t, g);
    if !v.contains(&t.len()) {
        v.push(t.len());
    }
    v
}

/// Where a forward-growing selection can end.
fn forward_stops(t: &[char], g: Granularity) -> Vec<usize> {
    match g {
        Granularity::Character | Granularity::Word => caret_stops(t, g),
        _ => {
            let s = starts(t, g);
            let mut out: Vec<usize> = Vec::new();
            for k in 0..s.len() {
                let next = if k + 1 < s.len() { s[k + 1] } else { t.len() };
                let unit = &t[s[k]..next];
                let trimmed = unit.len() - unit.iter().rev().take_while(|c| ws(**c)).count();
                let end = s[k] + trimmed;
                if out.last() != Some(&end) {
                    out.push(end);
                }
            }
            out
        }
    }
}

fn next_after(stops: &[usize], pos: usize) -> Option<usize> {
    stops.iter().copied().filter(|&s| s > pos).min()
}

fn prev_before(stops: &[usize], pos: usize) -> Option<usize> {
    stops.iter().copied().filter(|&s| s < pos).max()
}

fn walk(stops: &[usize], from: usize, delta: i64) -> usize {
    let mut pos = from;
    for _ in 0..delta.unsigned_abs() {
        let next = if delta > 0 {
            next_after(stops, pos)
        } else {
            prev_before(stops, pos)
        };
        match next {
            Some(p) => pos = p,
            None => break,
        }
    }
    pos
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefEditor {
    pub text: Vec<char>,
    pub caret: usize,
    /// (anchor, head)
    pub sel: Option<(usize, usize)>,
    pub gran: Granularity,
    pub clip: Vec<char>,
    pub undo: Vec<(Vec<char>, usize, Option<(usize, usize)>)>,
    pub initial: (Vec<char>, usize),
}

impl RefEditor {
    pub fn new(text: &str, caret: usize) -> Self {
        let text: Vec<char> = text.chars().collect();
        let caret = caret.min(text.len());
        Self {
            initial: (text.clone(), caret),
            text,
            caret,
            sel: None,
            gran: Granularity::Character,
            clip: Vec::new(),
            undo: Vec::new(),
        }
    }

    fn save(&mut self) {
        self.undo.push((self.text.clone(), self.caret, self.sel));
        if self.undo.len() > DEPTH {
            self.undo.remove(0);
        }
    }

    fn span(&self) -> Option<(usize, usize)> {
        self.sel.map(|(a, h)| (a.min(h), a.max(h)))
    }

    /// Applies `cmd`, returning the error the library should report.
    pub fn apply(&mut self, cmd: EditCommand) -> Result<(), EditError> {
        match cmd {
            EditCommand::Undo => {
                let (t, c, s) = self.undo.pop().ok_or(EditError::UndoStackEmpty)?;
                self.text = t;
                self.caret = c;
                self.sel = s;
            }
            EditCommand::ResetTask => {
                self.text = self.initial.0.clone();
                self.caret = self.initial.1;
                self.sel = None;
                self.undo.clear();
            }
            EditCommand::Cut | EditCommand::Copy | EditCommand::Delete => {
                let (a, b) = self.span().ok_or(EditError::NoSelection)?;
                self.save();
                if cmd != EditCommand::Delete {
                    self.clip = self.text[a..b].to_vec();
                }
                if cmd != EditCommand::Copy {
                    let mut t = self.text[..a].to_vec();
                    t.extend_from_slice(&self.text[b..]);
                    self.text = t;
                    self.caret = a;
                    self.sel = None;
                }
            }
            EditCommand::Paste => {
                if self.clip.is_empty() {
                    return Err(EditError::EmptyClipboard);
                }
                self.save();
                let (a, b) = self.span().unwrap_or((self.caret, self.caret));
                let mut t = self.text[..a].to_vec();
                t.extend_from_slice(&self.clip);
                t.extend_from_slice(&self.text[b..]);
                self.text = t;
                self.caret = a + self.clip.len();
                self.sel = None;
            }
            EditCommand::MoveCaret(d) => {
                self.save();
                if d != 0 {
                    self.caret = walk(&caret_stops(&self.text, self.gran), self.caret, d);
                    self.sel = None;
                }
            }
            EditCommand::SelectRange(d) => {
                self.save();
                if d != 0 {
                    let st = starts(&self.text, self.gran);
                    let fw = forward_stops(&self.text, self.gran);
                    let anchor = match self.sel {
                        Some((a, _)) => a,
                        None if d > 0 => st.iter().copied().filter(|&s| s <= self.caret).max().unwrap_or(0),
                        None => fw.iter().copied().filter(|&s| s >= self.caret).min().unwrap_or(self.caret),
                    };
                    let from = self.sel.map_or(self.caret, |(_, h)| h);
                    let head = if d > 0 { walk(&fw, from, d) } else { walk(&st, from, d) };
                    self.caret = head;
                    self.sel = if head == anchor { None } else { Some((anchor, head)) };
                }
            }
            EditCommand::SelectAll => {
                self.save();
                let n = self.text.len();
                self.caret = n;
                self.sel = if n == 0 { None } else { Some((0, n)) };
            }
            EditCommand::SetGranularity(g) => {
                self.save();
                self.gran = g;
            }
            EditCommand::ConfirmCaret => self.save(),
        }
        Ok(())
    }

    pub fn matches(&self, d: &Document) -> bool {
        d.chars() == self.text.as_slice()
            && d.caret() == self.caret
            && d.selection() == self.sel.map(|(anchor, head)| Selection { anchor, head })
            && d.granularity() == self.gran
            && d.clipboard().chars().eq(self.clip.iter().copied())
            && d.undo_depth() == self.undo.len()
    }
}

const ALPHABET: &[char] = &['a', 'b', 'c', ' ', ' ', '\n', '.', '!', '?', 'é'];

pub fn random_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

pub fn random_command(rng: &mut ChaCha8Rng) -> EditCommand {
    match rng.random_range(0..20) {
        0..=3 => EditCommand::MoveCaret(rng.random_range(-4..=4)),
        4..=7 => EditCommand::SelectRange(rng.random_range(-3..=3)),
        8 => EditCommand::Cut,
        9 => EditCommand::Copy,
        10 => EditCommand::Paste,
        11 | 12 => EditCommand::Undo,
        13 => EditCommand::Delete,
        14 => EditCommand::SelectAll,
        15 | 16 => EditCommand::SetGranularity(Granularity::ALL[rng.random_range(0..4)]),
        17 => EditCommand::ConfirmCaret,
        18 => EditCommand::ResetTask,
        _ => EditCommand::Paste,
    }
}

/// Violation counts of one fuzz run; all zero means a pass.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct FuzzSummary {
    pub sequences: usize,
    pub commands: usize,
    pub state_mismatches: usize,
    pub undo_inverse: usize,
    pub cut_vs_copy_delete: usize,
    pub select_all_span: usize,
    pub delete_touched_clipboard: usize,
    pub bounds: usize,
    pub first_failure: Option<String>,
}

impl FuzzSummary {
    pub fn violations(&self) -> usize {
        self.state_mismatches
            + self.undo_inverse
            + self.cut_vs_copy_delete
            + self.select_all_span
            + self.delete_touched_clipboard
            + self.bounds
    }

    fn fail(&mut self, what: String) {
        if self.first_failure.is_none() {
            self.first_failure = Some(what);
        }
    }
}

/// Runs `sequences` seeded command sequences through both editors.
pub fn fuzz(sequences: usize, seed: u64) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FuzzSummary {
        sequences,
        ..FuzzSummary::default()
    };
    for seq in 0..sequences {
        // long sequences every so often to push past the undo depth
        let len = if seq % 50 == 0 { 250 } else { rng.random_range(1..=40) };
        let text = random_text(&mut rng, 60);
        let caret = rng.random_range(0..=text.chars().count());
        let mut doc = Document::with_caret(&text, caret);
        let mut reference = RefEditor::new(&text, caret);
        for step in 0..len {
            let cmd = random_command(&mut rng);
            s.commands += 1;
            let got = apply(&doc, cmd);
            let want = reference.apply(cmd);
            if got.as_ref().err() != want.as_ref().err() {
                s.state_mismatches += 1;
                s.fail(format!("seq {seq} step {step} {cmd}: result {:?} vs {want:?}", got.as_ref().err()));
                break;
            }
            let next = got.unwrap_or_else(|_| doc.clone());
            if !reference.matches(&next) {
                s.state_mismatches += 1;
                s.fail(format!("seq {seq} step {step} {cmd}: {next:?} vs {reference:?}"));
                break;
            }
            if !next.invariants_hold() {
                s.bounds += 1;
                s.fail(format!("seq {seq} step {step} {cmd}: invariants"));
            }
            check_properties(&doc, cmd, &next, &mut s);
            doc = next;
        }
    }
    s
}

fn check_properties(before: &Document, cmd: EditCommand, after: &Document, s: &mut FuzzSummary) {
    let succeeded = apply(before, cmd).is_ok();
    if succeeded && !matches!(cmd, EditCommand::Undo | EditCommand::ResetTask) {
        let back = apply(after, EditCommand::Undo).expect("a snapshot was pushed");
        if back.snapshot() != before.snapshot() {
            s.undo_inverse += 1;
            s.fail(format!("undo after {cmd} did not restore"));
        }
    }
    match cmd {
        EditCommand::Cut if succeeded => {
            let composed = apply(before, EditCommand::Copy)
                .and_then(|d| apply(&d, EditCommand::Delete))
                .expect("copy and delete succeed when cut does");
            if composed.text() != after.text() || composed.clipboard() != after.clipboard() {
                s.cut_vs_copy_delete += 1;
                s.fail("cut differs from copy then delete".into());
            }
        }
        EditCommand::SelectAll => {
            let n = after.len();
            let ok = if n == 0 {
                after.selection().is_none()
            } else {
                after.selection().map(|x| (x.start(), x.end())) == Some((0, n))
            };
            if !ok {
                s.select_all_span += 1;
                s.fail("select all span".into());
            }
        }
        EditCommand::Delete => {
            if after.clipboard() != before.clipboard() {
                s.delete_touched_clipboard += 1;
                s.fail("delete changed the clipboard".into());
            }
        }
        _ => {}
    }
}
