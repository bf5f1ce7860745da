//! Substitutions: parsing, matrices, powers, languages and return words.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::matrix::IntMatrix;

pub type Letter = u8;
pub type Word = Vec<Letter>;

pub const DEFAULT_WORD_BUDGET: usize = 10_000_000;
const MAX_LETTERS: usize = 255;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SubstError {
    #[error("syntax error on line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("alphabet error: {0}")]
    Alphabet(String),
    #[error("image length {len} exceeds the budget of {cap} symbols")]
    Size { len: usize, cap: usize },
    #[error("language harvest did not saturate within the budget of {cap} symbols")]
    Cap { cap: usize },
    #[error("power iteration did not converge after {0} iterations")]
    Convergence(usize),
    #[error("substitution is not primitive")]
    NotPrimitive,
}

/// A substitution on the letters 1..=d. Letters are stored zero-based.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    d: usize,
    images: Vec<Word>,
    power: u32,
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Substitution(d={}, power={}; {})", self.d, self.power, self.to_text().replace('\n', "; "))
    }
}

impl Substitution {
    /// Builds from one-based images.
    pub fn new(images: &[Vec<usize>]) -> Result<Self, SubstError> {
        let d = images.len();
        if d == 0 {
            return Err(SubstError::Alphabet("empty alphabet".into()));
        }
        if d > MAX_LETTERS {
            return Err(SubstError::Alphabet(format!("{d} letters exceeds the limit of {MAX_LETTERS}")));
        }
        let mut out = Vec::with_capacity(d);
        for (a, img) in images.iter().enumerate() {
            if img.is_empty() {
                return Err(SubstError::Alphabet(format!("image of letter {} is empty", a + 1)));
            }
            let mut w = Word::with_capacity(img.len());
            for &s in img {
                if s == 0 || s > d {
                    return Err(SubstError::Alphabet(format!(
                        "symbol {s} in the image of {} is outside 1..{d}",
                        a + 1
                    )));
                }
                w.push((s - 1) as Letter);
            }
            out.push(w);
        }
        Ok(Substitution { d, images: out, power: 1 })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// Image of the zero-based letter `a`.
    pub fn image(&self, a: usize) -> &[Letter] {
        &self.images[a]
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn max_image_len(&self) -> usize {
        self.images.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn min_image_len(&self) -> usize {
        self.images.iter().map(|w| w.len()).min().unwrap_or(0)
    }

    /// One-based images, as written in files.
    pub fn images_one_based(&self) -> Vec<Vec<usize>> {
        self.images.iter().map(|w| w.iter().map(|&x| x as usize + 1).collect()).collect()
    }

    pub fn to_text(&self) -> String {
        self.images_one_based()
            .iter()
            .enumerate()
            .map(|(a, w)| {
                let body: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                format!("{} -> {}", a + 1, body.join(","))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// ζ(w), failing if the result would exceed `cap` symbols.
    pub fn apply(&self, w: &[Letter], cap: usize) -> Result<Word, SubstError> {
        let len: usize = w.iter().map(|&a| self.images[a as usize].len()).sum();
        if len > cap {
            return Err(SubstError::Size { len, cap });
        }
        let mut out = Word::with_capacity(len);
        for &a in w {
            out.extend_from_slice(&self.images[a as usize]);
        }
        Ok(out)
    }

    /// ζ^m(a) for the zero-based letter `a`.
    pub fn iterate(&self, a: usize, m: u32, cap: usize) -> Result<Word, SubstError> {
        let mut w = vec![a as Letter];
        for _ in 0..m {
            w = self.apply(&w, cap)?;
        }
        Ok(w)
    }

    /// Letters `a` such that ζ(a) begins with `a`, i.e. seeds of one-sided fixed points.
    pub fn fixed_point_seeds(&self) -> Vec<usize> {
        (0..self.d).filter(|&a| self.images[a][0] as usize == a).collect()
    }
}

pub fn parse_substitution(text: &str) -> Result<Substitution, SubstError> {
    let mut rules: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut max_letter = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = line
            .split_once("->")
            .ok_or_else(|| SubstError::Syntax { line: line_no, msg: "expected `<letter> -> <s1>,<s2>,...`".into() })?;
        let letter = parse_letter(lhs.trim(), line_no)?;
        let image: Vec<usize> =
            rhs.split(',').map(|tok| parse_letter(tok.trim(), line_no)).collect::<Result<_, _>>()?;
        max_letter = max_letter.max(letter).max(*image.iter().max().unwrap());
        if rules.insert(letter, image).is_some() {
            return Err(SubstError::Alphabet(format!("letter {letter} has more than one rule")));
        }
    }
    if rules.is_empty() {
        return Err(SubstError::Syntax { line: 0, msg: "no rules found".into() });
    }
    let mut images = Vec::with_capacity(max_letter);
    for a in 1..=max_letter {
        match rules.remove(&a) {
            Some(img) => images.push(img),
            None => return Err(SubstError::Alphabet(format!("letter {a} has no rule"))),
        }
    }
    Substitution::new(&images)
}

fn parse_letter(tok: &str, line: usize) -> Result<usize, SubstError> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(SubstError::Syntax { line, msg: format!("`{tok}` is not a letter") });
    }
    let v: usize = tok.parse().map_err(|_| SubstError::Syntax { line, msg: format!("`{tok}` is not a letter") })?;
    if v == 0 {
        return Err(SubstError::Alphabet(format!("letter 0 on line {line}; letters start at 1")));
    }
    if v > MAX_LETTERS {
        return Err(SubstError::Alphabet(format!("letter {v} exceeds the limit of {MAX_LETTERS}")));
    }
    Ok(v)
}

/// S(i, j) = number of occurrences of letter i in ζ(j).
pub fn build_matrix(z: &Substitution) -> IntMatrix {
    let mut m = IntMatrix::zeros(z.d, z.d);
    for (j, img) in z.images.iter().enumerate() {
        for &i in img {
            let i = i as usize;
            m.set(i, j, m.get(i, j) + 1);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Primitivity {
    pub primitive: bool,
    /// Smallest n with S^n > 0, when primitive.
    pub exponent: Option<usize>,
}

/// Searches n = 1..=(d-1)^2+1 for a positive power, using the zero pattern only.
pub fn is_primitive(s: &IntMatrix) -> Primitivity {
    assert!(s.is_square() && s.is_nonnegative());
    let d = s.rows();
    let pattern: Vec<bool> = (0..d * d).map(|k| s.get(k / d, k % d) > 0).collect();
    let limit = (d - 1) * (d - 1) + 1;
    let mut cur = pattern.clone();
    for n in 1..=limit {
        if cur.iter().all(|&x| x) {
            return Primitivity { primitive: true, exponent: Some(n) };
        }
        let mut next = vec![false; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] = (0..d).any(|k| cur[i * d + k] && pattern[k * d + j]);
            }
        }
        cur = next;
    }
    Primitivity { primitive: false, exponent: None }
}

/// ζ^k as a substitution record with `power` multiplied by k.
pub fn substitution_power(z: &Substitution, k: u32, cap: usize) -> Result<Substitution, SubstError> {
    assert!(k >= 1, "power must be positive");
    let mut images = Vec::with_capacity(z.d);
    for a in 0..z.d {
        images.push(z.iterate(a, k, cap)?);
    }
    Ok(Substitution { d: z.d, images, power: z.power * k })
}

/// All admissible words of length 1..=max_len.
///
/// Factors of ζ^{m+1}(a) of length at most M lie inside ζ(u) for a factor u of
/// ζ^m(a) of length at most M, so the harvest is iterated on factor sets directly
/// until it stops growing, which for a primitive substitution means saturation.
pub fn language(z: &Substitution, max_len: usize, budget: usize) -> Result<BTreeSet<Word>, SubstError> {
    let max_len = max_len.max(2);
    let mut cur: HashSet<Word> = (0..z.d).map(|a| vec![a as Letter]).collect();
    let mut stored: usize = cur.len();
    loop {
        let mut next: HashSet<Word> = cur.clone();
        for u in &cur {
            let img = z.apply(u, budget)?;
            for i in 0..img.len() {
                for l in 1..=max_len.min(img.len() - i) {
                    if next.insert(img[i..i + l].to_vec()) {
                        stored += l;
                        if stored > budget {
                            return Err(SubstError::Cap { cap: budget });
                        }
                    }
                }
            }
        }
        if next.len() == cur.len() {
            return Ok(cur.into_iter().collect());
        }
        cur = next;
    }
}

/// Factor complexity p(1), ..., p(n_max) of the language.
pub fn complexity(z: &Substitution, n_max: usize, budget: usize) -> Result<Vec<usize>, SubstError> {
    let lang = language(z, n_max, budget)?;
    let mut counts = vec![0usize; n_max];
    for w in &lang {
        if w.len() <= n_max {
            counts[w.len() - 1] += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AperiodicityReport {
    pub complexity: Vec<usize>,
    /// True when p(n) > n for every sampled n, which rules out eventual periodicity at these lengths.
    pub aperiodic_evidence: bool,
}

/// Heuristic diagnostic: periodic languages have bounded complexity, p(n) <= n at some n.
pub fn aperiodicity(z: &Substitution, n_max: usize, budget: usize) -> Result<AperiodicityReport, SubstError> {
    let c = complexity(z, n_max, budget)?;
    let ok = c.iter().enumerate().all(|(i, &p)| p > i + 1);
    Ok(AperiodicityReport { complexity: c, aperiodic_evidence: ok })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnWord {
    /// Zero-based letters.
    pub word: Word,
    pub letter: usize,
    pub population: Vec<i64>,
    pub good: bool,
    pub irreducible: bool,
}

impl ReturnWord {
    pub fn one_based(&self) -> Vec<usize> {
        self.word.iter().map(|&x| x as usize + 1).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnWordSet {
    pub d: usize,
    pub length_cap: usize,
    pub classical: bool,
    /// Return words grouped by their initial (zero-based) letter.
    pub by_letter: Vec<Vec<ReturnWord>>,
    /// Set when some letter has no return word within the cap.
    pub truncated: bool,
}

impl ReturnWordSet {
    pub fn all(&self) -> impl Iterator<Item = &ReturnWord> {
        self.by_letter.iter().flatten()
    }

    pub fn good(&self) -> impl Iterator<Item = &ReturnWord> {
        self.all().filter(|r| r.good)
    }

    pub fn irreducible(&self) -> impl Iterator<Item = &ReturnWord> {
        self.all().filter(|r| r.irreducible)
    }

    pub fn populations(&self) -> Vec<Vec<i64>> {
        self.all().map(|r| r.population.clone()).collect()
    }

    /// Every irreducible return word is good.
    pub fn all_elementary_good(&self) -> bool {
        self.irreducible().all(|r| r.good)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnWordOptions {
    /// Additionally require that c occurs in v only as its first letter.
    pub classical: bool,
    pub budget: usize,
}

impl Default for ReturnWordOptions {
    fn default() -> Self {
        ReturnWordOptions { classical: false, budget: DEFAULT_WORD_BUDGET }
    }
}

pub fn population(w: &[Letter], d: usize) -> Vec<i64> {
    let mut p = vec![0i64; d];
    for &a in w {
        p[a as usize] += 1;
    }
    p
}

fn occurs_in(needle: &[Letter], hay: &[Letter]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Return words v (v starts with c, vc admissible) of length at most `length_cap`.
pub fn enumerate_return_words(
    z: &Substitution,
    length_cap: usize,
    opts: ReturnWordOptions,
) -> Result<ReturnWordSet, SubstError> {
    let lang = language(z, length_cap + 1, opts.budget)?;
    let mut by_letter: Vec<Vec<ReturnWord>> = vec![Vec::new(); z.d];
    for vc in &lang {
        if vc.len() < 2 {
            continue;
        }
        let c = vc[0];
        if *vc.last().unwrap() != c {
            continue;
        }
        let v = &vc[..vc.len() - 1];
        // splitting at an interior c yields shorter return words, and conversely
        let irreducible = !v[1..].contains(&c);
        if opts.classical && !irreducible {
            continue;
        }
        let good = z.images.iter().all(|img| occurs_in(vc, img));
        by_letter[c as usize].push(ReturnWord {
            word: v.to_vec(),
            letter: c as usize,
            population: population(v, z.d),
            good,
            irreducible,
        });
    }
    for list in by_letter.iter_mut() {
        list.sort_by(|a, b| a.word.len().cmp(&b.word.len()).then_with(|| a.word.cmp(&b.word)));
    }
    let truncated = by_letter.iter().any(|l| !l.iter().any(|r| r.irreducible));
    Ok(ReturnWordSet { d: z.d, length_cap, classical: opts.classical, by_letter, truncated })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodPower {
    pub power: u32,
    pub substitution: Substitution,
    pub return_words: ReturnWordSet,
}

/// Smallest k <= max_power such that every elementary return word of ζ is good for ζ^k.
///
/// Elementary return words are those of the original substitution found within
/// `length_cap`; goodness is tested against the images of ζ^k.
pub fn find_good_power(
    z: &Substitution,
    length_cap: usize,
    max_power: u32,
    opts: ReturnWordOptions,
) -> Result<Option<GoodPower>, SubstError> {
    let base = enumerate_return_words(z, length_cap, opts)?;
    if base.truncated {
        return Ok(None);
    }
    for k in 1..=max_power {
        let zk = match substitution_power(z, k, opts.budget) {
            Ok(s) => s,
            Err(SubstError::Size { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut rws = base.clone();
        for list in rws.by_letter.iter_mut() {
            for r in list.iter_mut() {
                let mut vc = r.word.clone();
                vc.push(r.letter as Letter);
                r.good = zk.images.iter().all(|img| occurs_in(&vc, img));
            }
        }
        if rws.all_elementary_good() {
            return Ok(Some(GoodPower { power: k, substitution: zk, return_words: rws }));
        }
    }
    Ok(None)
}

/// Normalized Perron-Frobenius eigenvector of S (letter frequencies).
pub fn letter_frequencies(z: &Substitution) -> Result<Vec<f64>, SubstError> {
    let s = build_matrix(z);
    if !is_primitive(&s).primitive {
        return Err(SubstError::NotPrimitive);
    }
    let d = z.d;
    let mut v = vec![1.0 / d as f64; d];
    // iterate with S + I, which has the same eigenvectors and a strictly dominant eigenvalue
    const MAX_IT: usize = 100_000;
    for _ in 0..MAX_IT {
        let mut w = vec![0.0; d];
        for i in 0..d {
            w[i] = v[i] + (0..d).map(|j| s.get(i, j) as f64 * v[j]).sum::<f64>();
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let diff = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if diff < 1e-15 {
            return Ok(v);
        }
    }
    Err(SubstError::Convergence(MAX_IT))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Substitution {
        parse_substitution("1 -> 1,2\n2 -> 1").unwrap()
    }

    #[test]
    fn parses_and_validates() {
        let z = fib();
        assert_eq!(z.d(), 2);
        assert_eq!(z.images_one_based(), vec![vec![1, 2], vec![1]]);
        assert!(matches!(parse_substitution("1 -> 1,2\n2 -> 3"), Err(SubstError::Alphabet(_))));
        assert!(matches!(parse_substitution("1 -> 1,,2\n2 -> 1"), Err(SubstError::Syntax { line: 1, .. })));
        assert!(matches!(parse_substitution(""), Err(SubstError::Syntax { .. })));
        assert!(matches!(parse_substitution("1 -> 1\n1 -> 1"), Err(SubstError::Alphabet(_))));
        let z3 = parse_substitution("# three letters\n1->1,2\n 2  ->  1,3 \n\n3 -> 1 # tail\n").unwrap();
        assert_eq!(z3.d(), 3);
        assert_eq!(parse_substitution(&z3.to_text()).unwrap(), z3);
    }

    #[test]
    fn matrices() {
        assert_eq!(build_matrix(&fib()).to_rows(), vec![vec![1, 1], vec![1, 0]]);
        let tm = parse_substitution("1 -> 1,2\n2 -> 2,1").unwrap();
        assert_eq!(build_matrix(&tm).to_rows(), vec![vec![1, 1], vec![1, 1]]);
        let one = parse_substitution("1 -> 1").unwrap();
        assert_eq!(build_matrix(&one).to_rows(), vec![vec![1]]);
    }

    #[test]
    fn primitivity_witness() {
        let p = is_primitive(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]));
        assert_eq!(p, Primitivity { primitive: true, exponent: Some(2) });
        assert!(!is_primitive(&IntMatrix::from_rows(&[vec![2, 0], vec![0, 2]])).primitive);
        assert_eq!(is_primitive(&IntMatrix::from_rows(&[vec![1]])).exponent, Some(1));
    }

    #[test]
    fn powers_compose() {
        let z2 = substitution_power(&fib(), 2, 100).unwrap();
        assert_eq!(z2.images_one_based(), vec![vec![1, 2, 1], vec![1, 2]]);
        let z3 = substitution_power(&fib(), 3, 100).unwrap();
        assert_eq!(z3.images_one_based(), vec![vec![1, 2, 1, 1, 2], vec![1, 2, 1]]);
        assert_eq!(z3.power(), 3);
        assert_eq!(substitution_power(&fib(), 1, 100).unwrap(), fib());
        assert!(matches!(substitution_power(&fib(), 20, 100), Err(SubstError::Size { .. })));
    }

    #[test]
    fn fibonacci_language_matches_long_prefix() {
        // brute force: factors of ζ^12(1)
        let w = fib().iterate(0, 12, 1 << 20).unwrap();
        let mut brute = BTreeSet::new();
        for l in 1..=6 {
            for win in w.windows(l) {
                brute.insert(win.to_vec());
            }
        }
        assert_eq!(language(&fib(), 6, 1 << 20).unwrap(), brute);
        assert_eq!(complexity(&fib(), 6, 1 << 20).unwrap(), vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn fibonacci_return_words() {
        let rws = enumerate_return_words(&fib(), 3, ReturnWordOptions::default()).unwrap();
        let ones: Vec<Vec<usize>> = rws.by_letter[0].iter().map(|r| r.one_based()).collect();
        assert!(ones.contains(&vec![1]));
        assert!(ones.contains(&vec![1, 2]));
        let r12 = rws.by_letter[0].iter().find(|r| r.one_based() == vec![1, 2]).unwrap();
        assert_eq!(r12.population, vec![1, 1]);
        let r1 = rws.by_letter[0].iter().find(|r| r.one_based() == vec![1]).unwrap();
        assert_eq!(r1.population, vec![1, 0]);
        assert!(rws.all().all(|r| r.population.iter().sum::<i64>() == r.word.len() as i64));
    }

    #[test]
    fn single_letter_and_short_cap() {
        let z = parse_substitution("1 -> 1,1").unwrap();
        let rws = enumerate_return_words(&z, 1, ReturnWordOptions::default()).unwrap();
        assert_eq!(rws.by_letter[0].len(), 1);
        assert_eq!(rws.by_letter[0][0].population, vec![1]);
        // the shortest return word to 2 in Fibonacci is 21
        let short = enumerate_return_words(&fib(), 1, ReturnWordOptions::default()).unwrap();
        assert!(short.truncated);
        assert_eq!(short.good().count(), 0);
    }

    #[test]
    fn frequencies() {
        let f = letter_frequencies(&fib()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((f[0] - phi / (1.0 + phi)).abs() < 1e-12);
        assert!((f[1] - 1.0 / (1.0 + phi)).abs() < 1e-12);
        let tm = parse_substitution("1 -> 1,2\n2 -> 2,1").unwrap();
        let f = letter_frequencies(&tm).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12);
        assert_eq!(letter_frequencies(&parse_substitution("1 -> 1,1").unwrap()).unwrap(), vec![1.0]);
    }
}
