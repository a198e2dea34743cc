//! Pulls controller source out of a chat reply.
//!
//! Fenced blocks win: every ```` ``` ```` block is taken, in order. A reply
//! without fences is accepted whole when at least 80% of its non-blank lines
//! look like code (see [`looks_like_code`]); anything else has no code.

const CODE_SHARE: f64 = 0.8;

const CODE_PREFIXES: [&str; 16] = [
    "#", "//", "def ", "return", "if ", "elif ", "else", "for ", "while ", "import ", "from ", "class ", "fn ", "let ",
    "use ", "}",
];

/// A line counts as code when it is a comment, an assignment, a keyword
/// statement, or ends in block punctuation.
pub fn looks_like_code(line: &str) -> bool {
    let text = line.trim();
    if CODE_PREFIXES.iter().any(|p| text.starts_with(p)) {
        return true;
    }
    if text.ends_with([':', '{', '}', ';', ')', ']', ',']) {
        return true;
    }
    match text.split_once('=') {
        Some((lhs, _)) => {
            let lhs = lhs.trim().trim_end_matches(['+', '-', '*', '/', '!', '<', '>']);
            !lhs.is_empty() && lhs.split_whitespace().count() <= 2
        }
        None => false,
    }
}

/// Concatenated fenced code, the whole reply if it reads as code, or `None`.
pub fn extract_code(reply: &str) -> Option<String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<String> = None;
    for line in reply.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(String::new()),
            (Some(_), true) => blocks.push(current.take().expect("inside a block")),
            (Some(body), false) => {
                body.push_str(line);
                body.push('\n');
            }
            (None, false) => {}
        }
    }
    // a reply cut off inside a block still carries the code so far
    if let Some(body) = current {
        blocks.push(body);
    }
    if !blocks.is_empty() {
        let code: String = blocks.concat();
        return (!code.trim().is_empty()).then_some(code);
    }
    let lines: Vec<&str> = reply.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return None;
    }
    let code_lines = lines.iter().filter(|l| looks_like_code(l)).count();
    (code_lines as f64 >= CODE_SHARE * lines.len() as f64).then(|| reply.to_string())
}
