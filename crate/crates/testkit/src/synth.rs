//! Synthetic labelled issues.

use issuebert::corpus::{CleanExample, IssueLabel, IssueRecord};
use issuebert::rng::SeededRng;

const BUG_WORDS: &[&str] = &["crash", "error", "broken", "fails", "exception", "regression"];
const ENH_WORDS: &[&str] = &["add", "support", "feature", "improve", "option", "allow"];
const QUE_WORDS: &[&str] = &["how", "why", "what", "help", "understand", "possible"];
const FILLER: &[&str] = &["the", "app", "page", "when", "button", "file", "user", "with", "server", "list"];

fn keywords(label: IssueLabel) -> &'static [&'static str] {
    match label {
        IssueLabel::Bug => BUG_WORDS,
        IssueLabel::Enhancement => ENH_WORDS,
        IssueLabel::Question => QUE_WORDS,
    }
}

fn pick<'a>(rng: &mut SeededRng, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len())]
}

/// `n` short examples whose label is determined by a class keyword; classes
/// cycle bug, enhancement, question.
pub fn separable(n: usize, seed: u64) -> Vec<CleanExample> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let label = IssueLabel::ALL[i % 3];
            let mut words: Vec<&str> = (0..2 + rng.below(3)).map(|_| pick(&mut rng, FILLER)).collect();
            let at = rng.below(words.len() + 1);
            words.insert(at, pick(&mut rng, keywords(label)));
            CleanExample {
                text: words.join(" "),
                label,
            }
        })
        .collect()
}

const BUG_TITLES: &[&str] = &[
    "{C} crashes when opening the {T}",
    "Error while saving {T}",
    "{T} is broken after update",
    "Unexpected exception in {C}",
    "{C} fails to load {T}",
    "Regression: {T} no longer renders",
    "Null pointer in {C} on startup",
    "Wrong output from {C}",
];
const ENH_TITLES: &[&str] = &[
    "Add support for {T} in {C}",
    "Feature request: export {T}",
    "Allow configuring the {T}",
    "Improve performance of {C}",
    "Option to disable {T}",
    "Make {C} {T} customizable",
    "Provide dark mode for {C}",
    "Support multiple {T}",
];
const QUE_TITLES: &[&str] = &[
    "How do I configure {T}?",
    "Why does {C} need {T}?",
    "Is it possible to use {T} with {C}?",
    "Question about {C} {T}",
    "What is the recommended {T} setup?",
    "Help with {C} installation",
    "Where can I find the {T} docs?",
    "Can someone explain the {T} option?",
];
const COMPONENTS: &[&str] = &[
    "the editor", "the CLI", "the parser", "the plugin", "the dashboard", "the sync service", "the installer",
    "the web view", "the API client", "the scheduler",
];
const TOPICS: &[&str] = &[
    "settings", "log file", "proxy", "theme", "cache", "database", "keyboard shortcuts", "notifications", "tabs",
    "markdown preview", "config file", "login page",
];
const BUG_BODY: &[&str] = &[
    "Steps to reproduce: open {T} and click save.",
    "Stack trace:\n  at {C}.run (main.js:42)\n  at process",
    "Expected it to work but it throws an error.",
    "This started after upgrading to the latest version.",
    "The application freezes and then crashes.",
    "Actual behavior: nothing happens, console shows TypeError.",
    "It fails every time on Windows 10.",
];
const ENH_BODY: &[&str] = &[
    "It would be great if {C} could handle {T}.",
    "Currently there is no way to change {T}; please add an option.",
    "This feature would improve the workflow for many users.",
    "Proposal: add a flag to control {T}.",
    "Other tools already support this, so it would be nice to have.",
    "I would like to be able to customize {T}.",
];
const QUE_BODY: &[&str] = &[
    "I read the docs but I could not figure out how {T} works.",
    "Is there an example somewhere?",
    "Thanks in advance for any help!",
    "What am I missing here?",
    "I am new to {C}, sorry if this is obvious.",
    "Could you point me to the right documentation?",
];
const SHARED_BODY: &[&str] = &[
    "Version: 2.3.1",
    "OS: Ubuntu 22.04",
    "I am using {C} together with {T}.",
    "See attached screenshot.",
    "",
    "\tThanks.",
];

fn fill(rng: &mut SeededRng, template: &str) -> String {
    template
        .replace("{C}", pick(rng, COMPONENTS))
        .replace("{T}", pick(rng, TOPICS))
}

/// One raw issue of class `label`. With probability `noise` the title is
/// drawn from another class, which keeps the task from being trivially
/// separable.
pub fn issue(rng: &mut SeededRng, label: IssueLabel, noise: f64) -> IssueRecord {
    let (titles, bodies) = match label {
        IssueLabel::Bug => (BUG_TITLES, BUG_BODY),
        IssueLabel::Enhancement => (ENH_TITLES, ENH_BODY),
        IssueLabel::Question => (QUE_TITLES, QUE_BODY),
    };
    let title_pool = if rng.uniform() < noise {
        [BUG_TITLES, ENH_TITLES, QUE_TITLES][rng.below(3)]
    } else {
        titles
    };
    let template = pick(rng, title_pool);
    let title = fill(rng, template);
    let mut body = Vec::new();
    for _ in 0..1 + rng.below(3) {
        let pool = if rng.uniform() < 0.3 { SHARED_BODY } else { bodies };
        let template = pick(rng, pool);
        body.push(fill(rng, template));
    }
    let sep = ["\n", "\r\n", "  ", " "][rng.below(4)];
    IssueRecord {
        label,
        title,
        body: body.join(sep),
    }
}

/// Parameters of a synthetic issue sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub size: usize,
    /// Test-split class counts of the original corpus.
    pub weights: [u64; 3],
    pub noise: f64,
    pub seed: u64,
}

/// The bundled `data/sample_issues.csv`.
pub const SAMPLE: SampleSpec = SampleSpec {
    size: 3000,
    weights: [40152, 33290, 7076],
    noise: 0.3,
    seed: 2022,
};

/// `[bug, enhancement, question]` counts for `n` issues in the given
/// proportions, largest-remainder rounding.
pub fn class_sizes(n: usize, weights: [u64; 3]) -> [usize; 3] {
    let total: u64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| n as f64 * w as f64 / total as f64).collect();
    let mut sizes: [usize; 3] = [exact[0] as usize, exact[1] as usize, exact[2] as usize];
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// `n` shuffled issues in the given class proportions.
pub fn issues(n: usize, weights: [u64; 3], noise: f64, seed: u64) -> Vec<IssueRecord> {
    let mut rng = SeededRng::new(seed);
    let sizes = class_sizes(n, weights);
    let mut out = Vec::with_capacity(n);
    for (label, &size) in IssueLabel::ALL.iter().zip(&sizes) {
        for _ in 0..size {
            out.push(issue(&mut rng, *label, noise));
        }
    }
    rng.shuffle(&mut out);
    out
}
