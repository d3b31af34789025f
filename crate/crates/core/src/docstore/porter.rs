//! The classic Porter (1980) suffix-stripping stemmer, steps 1a through 5b.
//!
//! Only lowercase ASCII-alphabetic words are stemmed; anything else is
//! returned unchanged.

struct Word {
    b: Vec<u8>,
}

impl Word {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// m in [C](VC){m}[V], measured over the first `len` bytes.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut prev_vowel = false;
        for i in 0..len {
            let cons = self.is_consonant(i);
            if cons && prev_vowel {
                m += 1;
            }
            prev_vowel = !cons;
        }
        m
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.b[len - 1] == self.b[len - 2] && self.is_consonant(len - 1)
    }

    /// *o: stem ends consonant-vowel-consonant, last not w, x or y.
    fn ends_cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.b[len - 1], b'w' | b'x' | b'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        self.b.ends_with(suffix.as_bytes())
    }

    fn replace_suffix(&mut self, suffix_len: usize, replacement: &str) {
        let keep = self.b.len() - suffix_len;
        self.b.truncate(keep);
        self.b.extend_from_slice(replacement.as_bytes());
    }

    /// Applies the first rule whose suffix matches; if its condition fails no
    /// other rule is tried.
    fn apply_rules(&mut self, rules: &[(&str, &str)], cond: impl Fn(&Word, usize) -> bool) {
        for (suffix, replacement) in rules {
            if self.ends_with(suffix) {
                let stem_len = self.b.len() - suffix.len();
                if cond(self, stem_len) {
                    self.replace_suffix(suffix.len(), replacement);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        let rules = [("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")];
        self.apply_rules(&rules, |_, _| true);
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            let stem = self.b.len() - 3;
            if self.measure(stem) > 0 {
                self.replace_suffix(3, "ee");
            }
            return;
        }
        let mut stripped = false;
        for suffix in ["ed", "ing"] {
            if self.ends_with(suffix) {
                let stem = self.b.len() - suffix.len();
                if self.has_vowel(stem) {
                    self.b.truncate(stem);
                    stripped = true;
                }
                break;
            }
        }
        if !stripped {
            return;
        }
        for (suffix, replacement) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
            if self.ends_with(suffix) {
                self.replace_suffix(suffix.len(), replacement);
                return;
            }
        }
        let len = self.b.len();
        if self.ends_double_consonant(len) {
            if !matches!(self.b[len - 1], b'l' | b's' | b'z') {
                self.b.pop();
            }
            return;
        }
        if self.measure(len) == 1 && self.ends_cvc(len) {
            self.b.push(b'e');
        }
    }

    fn step1c(&mut self) {
        self.apply_rules(&[("y", "i")], |w, len| w.has_vowel(len));
    }

    fn step2(&mut self) {
        let rules = [
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        self.apply_rules(&rules, |w, len| w.measure(len) > 0);
    }

    fn step3(&mut self) {
        let rules = [
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_rules(&rules, |w, len| w.measure(len) > 0);
    }

    fn step4(&mut self) {
        let rules = [
            ("al", ""),
            ("ance", ""),
            ("ence", ""),
            ("er", ""),
            ("ic", ""),
            ("able", ""),
            ("ible", ""),
            ("ant", ""),
            ("ement", ""),
            ("ment", ""),
            ("ent", ""),
            ("ou", ""),
            ("ism", ""),
            ("ate", ""),
            ("iti", ""),
            ("ous", ""),
            ("ive", ""),
            ("ize", ""),
        ];
        // no other step-4 suffix ends in "ion", so it can be handled alone
        if self.ends_with("ion") {
            let stem = self.b.len() - 3;
            if stem > 0 && matches!(self.b[stem - 1], b's' | b't') && self.measure(stem) > 1 {
                self.b.truncate(stem);
            }
            return;
        }
        self.apply_rules(&rules, |w, len| w.measure(len) > 1);
    }

    fn step5a(&mut self) {
        if self.ends_with("e") {
            let stem = self.b.len() - 1;
            let m = self.measure(stem);
            if m > 1 || (m == 1 && !self.ends_cvc(stem)) {
                self.b.truncate(stem);
            }
        }
    }

    fn step5b(&mut self) {
        let len = self.b.len();
        if self.ends_with("ll") && self.measure(len - 1) > 1 {
            self.b.pop();
        }
    }
}

/// Stems a lowercase ASCII word.
pub fn porter_stem(word: &str) -> String {
    if word.is_empty() || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = Word {
        b: word.as_bytes().to_vec(),
    };
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    String::from_utf8(w.b).expect("ascii in, ascii out")
}
