//! Line-oriented scenario file format.
//!
//! ```text
//! # comment
//! scenario TC1
//! mode = caem
//! duration = 20
//! description = """
//! Free text, any number of lines.
//! """
//!
//! [road]
//! lane_count = 3
//! lane_width = 3.5
//! length = 1500
//! oncoming_strip = -3.5 0        # optional: from to
//!
//! [ego]
//! lane = 1
//! speed = 33.333333333333336
//! start = 100                    # optional, default 100
//! set_speed = 30                 # optional
//!
//! [expected]                     # optional section
//! lane_change_required = true
//! lane_change_forbidden = false
//! time_gap_band = 1 3            # optional: min max
//! set_speed_tolerance = 0.5      # optional
//!
//! [agent OverTaker]
//! lane = 0
//! offset = 3.333                 # ego front bumper to agent rear bumper
//! speed = 35
//! heading = 1                    # 1 same direction, -1 oncoming
//!
//! [phases]                       # belongs to the preceding agent
//! hold 4
//! cut_in 1 2                     # target_lane duration
//! decelerate 6 0                 # rate floor_speed
//! match_speed
//! static
//! ```
//!
//! Units are meters, seconds and m/s. Numbers are written in their shortest
//! round-trip form so exporting a parsed file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::scalar::Scalar;

use super::catalog::EGO_START;
use super::types::{AgentScript, ExpectedOutcome, Heading, Mode, Phase, RoadSpec, ScenarioSpec, Strip};
use super::ScenarioError;

pub fn serialize_scenario<T: Scalar>(spec: &ScenarioSpec<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}", spec.id);
    let _ = writeln!(out, "mode = {}", spec.mode.as_str().to_ascii_lowercase());
    let _ = writeln!(out, "duration = {}", spec.duration);
    let _ = writeln!(out, "description = \"\"\"");
    for line in spec.description.split('\n') {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "\"\"\"");

    let road = &spec.road;
    let _ = writeln!(out, "\n[road]");
    let _ = writeln!(out, "lane_count = {}", road.lane_count);
    let _ = writeln!(out, "lane_width = {}", road.lane_width);
    let _ = writeln!(out, "length = {}", road.length);
    if let Some(strip) = road.oncoming_strip {
        let _ = writeln!(out, "oncoming_strip = {} {}", strip.from, strip.to);
    }

    let _ = writeln!(out, "\n[ego]");
    let _ = writeln!(out, "lane = {}", spec.ego_lane);
    let _ = writeln!(out, "speed = {}", spec.ego_speed);
    let _ = writeln!(out, "start = {}", spec.ego_start);
    if let Some(set) = spec.set_speed {
        let _ = writeln!(out, "set_speed = {set}");
    }

    let expected = &spec.expected;
    let _ = writeln!(out, "\n[expected]");
    let _ = writeln!(out, "lane_change_required = {}", expected.lane_change_required);
    let _ = writeln!(out, "lane_change_forbidden = {}", expected.lane_change_forbidden);
    if let Some((lo, hi)) = expected.time_gap_band {
        let _ = writeln!(out, "time_gap_band = {lo} {hi}");
    }
    if let Some(tol) = expected.set_speed_tolerance {
        let _ = writeln!(out, "set_speed_tolerance = {tol}");
    }

    for agent in &spec.agents {
        let _ = writeln!(out, "\n[agent {}]", agent.name);
        let _ = writeln!(out, "lane = {}", agent.initial_lane);
        let _ = writeln!(out, "offset = {}", agent.initial_offset);
        let _ = writeln!(out, "speed = {}", agent.initial_speed);
        let _ = writeln!(out, "heading = {}", agent.heading.as_int());
        let _ = writeln!(out, "\n[phases]");
        for phase in &agent.phases {
            match phase {
                Phase::Hold { duration } => writeln!(out, "hold {duration}"),
                Phase::CutIn { target_lane, duration } => writeln!(out, "cut_in {target_lane} {duration}"),
                Phase::Decelerate { rate, floor_speed } => writeln!(out, "decelerate {rate} {floor_speed}"),
                Phase::MatchSpeed => writeln!(out, "match_speed"),
                Phase::Static => writeln!(out, "static"),
            }
            .expect("writing to a String cannot fail");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Header,
    Road,
    Ego,
    Expected,
    Agent,
    Phases,
}

/// A `key = value` entry remembered with its position for error reporting.
#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

#[derive(Default)]
struct Table {
    entries: BTreeMap<String, Entry>,
}

impl Table {
    fn insert(&mut self, key: &str, entry: Entry) -> Result<(), ScenarioError> {
        if self.entries.contains_key(key) {
            return Err(ScenarioError::Syntax {
                line: entry.line,
                column: 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        self.entries.insert(key.to_string(), entry);
        Ok(())
    }
}

struct AgentDraft {
    name: String,
    table: Table,
    phases: Vec<(Vec<String>, usize)>,
    has_phases: bool,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax { line, column, message: message.into() }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(index) => &line[..index],
        None => line,
    }
}

pub fn parse_scenario<T: Scalar>(text: &str) -> Result<ScenarioSpec<T>, ScenarioError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut id: Option<(String, usize)> = None;
    let mut header = Table::default();
    let mut description: Option<String> = None;
    let mut road = Table::default();
    let mut ego = Table::default();
    let mut expected = Table::default();
    let mut agents: Vec<AgentDraft> = Vec::new();
    let mut section = Section::Header;
    let mut seen_sections: Vec<&'static str> = Vec::new();

    let mut index = 0;
    while index < lines.len() {
        let raw = lines[index];
        let line_no = index + 1;
        index += 1;
        let content = strip_comment(raw);
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let column = content.len() - content.trim_start().len() + 1;

        if id.is_none() {
            let rest = trimmed
                .strip_prefix("scenario")
                .filter(|rest| rest.starts_with(char::is_whitespace))
                .map(str::trim)
                .filter(|rest| !rest.is_empty() && !rest.contains(char::is_whitespace));
            match rest {
                Some(name) => id = Some((name.to_string(), line_no)),
                None => return Err(syntax(line_no, column, "expected `scenario <id>` header")),
            }
            continue;
        }

        if let Some(inner) = trimmed.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                return Err(syntax(line_no, column + trimmed.len(), "missing `]`"));
            };
            let mut words = inner.split_whitespace();
            let head = words.next().unwrap_or("");
            let name = words.next();
            if words.next().is_some() {
                return Err(syntax(line_no, column, "unexpected text in section header"));
            }
            section = match (head, name) {
                ("road", None) => Section::Road,
                ("ego", None) => Section::Ego,
                ("expected", None) => Section::Expected,
                ("agent", Some(name)) => {
                    agents.push(AgentDraft {
                        name: name.to_string(),
                        table: Table::default(),
                        phases: Vec::new(),
                        has_phases: false,
                    });
                    Section::Agent
                }
                ("agent", None) => return Err(syntax(line_no, column, "agent section needs a name")),
                ("phases", None) => match agents.last_mut() {
                    Some(agent) if !agent.has_phases => {
                        agent.has_phases = true;
                        Section::Phases
                    }
                    Some(_) => return Err(syntax(line_no, column, "agent already has a phases section")),
                    None => return Err(syntax(line_no, column, "phases section must follow an agent section")),
                },
                _ => return Err(syntax(line_no, column + 1, format!("unknown section `{inner}`"))),
            };
            let tag = match section {
                Section::Road => Some("road"),
                Section::Ego => Some("ego"),
                Section::Expected => Some("expected"),
                _ => None,
            };
            if let Some(tag) = tag {
                if seen_sections.contains(&tag) {
                    return Err(syntax(line_no, column, format!("duplicate section `{tag}`")));
                }
                seen_sections.push(tag);
            }
            continue;
        }

        if section == Section::Phases {
            let words: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
            agents.last_mut().expect("phases always follow an agent").phases.push((words, line_no));
            continue;
        }

        let Some(eq) = content.find('=') else {
            return Err(syntax(line_no, column, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(syntax(line_no, column, "invalid key"));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_column = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(syntax(line_no, value_column, format!("missing value for `{key}`")));
        }

        if section == Section::Header && key == "description" {
            if description.is_some() {
                return Err(syntax(line_no, column, "duplicate key `description`"));
            }
            if value == "\"\"\"" {
                let mut body = Vec::new();
                let mut closed = false;
                while index < lines.len() {
                    let text = lines[index];
                    index += 1;
                    if text.trim_end() == "\"\"\"" {
                        closed = true;
                        break;
                    }
                    body.push(text);
                }
                if !closed {
                    return Err(syntax(line_no, value_column, "unterminated description block"));
                }
                description = Some(body.join("\n"));
            } else {
                // raw single-line form keeps comments out of the text
                let full = raw[raw.find('=').expect("checked above") + 1..].trim();
                description = Some(full.to_string());
            }
            continue;
        }

        let entry = Entry { value: value.to_string(), line: line_no, column: value_column };
        let table = match section {
            Section::Header => &mut header,
            Section::Road => &mut road,
            Section::Ego => &mut ego,
            Section::Expected => &mut expected,
            Section::Agent => &mut agents.last_mut().expect("agent section opened").table,
            Section::Phases => unreachable!(),
        };
        table.insert(key, entry)?;
    }

    let Some((id, _)) = id else {
        return Err(syntax(1, 1, "empty scenario file: expected `scenario <id>` header"));
    };
    Builder { header, road, ego, expected }.finish(id, description, agents)
}

struct Builder {
    header: Table,
    road: Table,
    ego: Table,
    expected: Table,
}

fn take(table: &mut Table, key: &str) -> Option<Entry> {
    table.entries.remove(key)
}

fn required(table: &mut Table, path: &str, key: &str) -> Result<Entry, ScenarioError> {
    take(table, key).ok_or_else(|| ScenarioError::semantic(format!("{path}{key}"), "missing required field"))
}

fn number<T: Scalar>(entry: &Entry) -> Result<T, ScenarioError> {
    entry
        .value
        .parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(entry.line, entry.column, format!("`{}` is not a finite number", entry.value)))
}

fn numbers<T: Scalar>(entry: &Entry, count: usize) -> Result<Vec<T>, ScenarioError> {
    let parts: Vec<&str> = entry.value.split_whitespace().collect();
    if parts.len() != count {
        return Err(syntax(entry.line, entry.column, format!("expected {count} numbers")));
    }
    parts.iter().map(|part| number(&Entry { value: part.to_string(), ..entry.clone() })).collect()
}

fn integer(entry: &Entry) -> Result<i64, ScenarioError> {
    entry
        .value
        .parse::<i64>()
        .map_err(|_| syntax(entry.line, entry.column, format!("`{}` is not an integer", entry.value)))
}

fn boolean(entry: &Entry) -> Result<bool, ScenarioError> {
    match entry.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(syntax(entry.line, entry.column, format!("`{other}` is not a boolean"))),
    }
}

fn reject_unknown(table: &Table, path: &str) -> Result<(), ScenarioError> {
    match table.entries.iter().next() {
        Some((key, entry)) => Err(syntax(entry.line, 1, format!("unknown key `{path}{key}`"))),
        None => Ok(()),
    }
}

fn non_negative_lane(entry: &Entry, field: &str) -> Result<usize, ScenarioError> {
    let lane = integer(entry)?;
    usize::try_from(lane).map_err(|_| ScenarioError::semantic(field, "lane index out of range"))
}

fn phase<T: Scalar>(words: &[String], line: usize) -> Result<Phase<T>, ScenarioError> {
    let arg = |i: usize| -> Result<T, ScenarioError> {
        let entry = Entry { value: words[i].clone(), line, column: 1 };
        number(&entry)
    };
    let expect = |n: usize| -> Result<(), ScenarioError> {
        if words.len() == n + 1 {
            Ok(())
        } else {
            Err(syntax(line, 1, format!("`{}` takes {n} argument(s)", words[0])))
        }
    };
    match words[0].as_str() {
        "hold" => {
            expect(1)?;
            Ok(Phase::Hold { duration: arg(1)? })
        }
        "cut_in" => {
            expect(2)?;
            let lane = integer(&Entry { value: words[1].clone(), line, column: 1 })?;
            Ok(Phase::CutIn { target_lane: lane, duration: arg(2)? })
        }
        "decelerate" => {
            expect(2)?;
            Ok(Phase::Decelerate { rate: arg(1)?, floor_speed: arg(2)? })
        }
        "match_speed" => {
            expect(0)?;
            Ok(Phase::MatchSpeed)
        }
        "static" => {
            expect(0)?;
            Ok(Phase::Static)
        }
        other => Err(syntax(line, 1, format!("unknown phase `{other}`"))),
    }
}

impl Builder {
    fn finish<T: Scalar>(
        mut self,
        id: String,
        description: Option<String>,
        drafts: Vec<AgentDraft>,
    ) -> Result<ScenarioSpec<T>, ScenarioError> {
        let mode_entry = required(&mut self.header, "", "mode")?;
        let mode = Mode::parse(&mode_entry.value).ok_or_else(|| {
            syntax(mode_entry.line, mode_entry.column, format!("unknown mode `{}`", mode_entry.value))
        })?;
        let duration = number(&required(&mut self.header, "", "duration")?)?;
        reject_unknown(&self.header, "")?;
        let description =
            description.ok_or_else(|| ScenarioError::semantic("description", "missing required field"))?;

        let lane_count_entry = required(&mut self.road, "road.", "lane_count")?;
        let lane_count = usize::try_from(integer(&lane_count_entry)?)
            .map_err(|_| ScenarioError::semantic("road.lane_count", "must be at least 1"))?;
        let lane_width = number(&required(&mut self.road, "road.", "lane_width")?)?;
        let length = number(&required(&mut self.road, "road.", "length")?)?;
        let oncoming_strip = match take(&mut self.road, "oncoming_strip") {
            Some(entry) => {
                let v = numbers::<T>(&entry, 2)?;
                Some(Strip { from: v[0], to: v[1] })
            }
            None => None,
        };
        reject_unknown(&self.road, "road.")?;

        let ego_lane = non_negative_lane(&required(&mut self.ego, "ego.", "lane")?, "ego_lane")?;
        let ego_speed = number(&required(&mut self.ego, "ego.", "speed")?)?;
        let ego_start = match take(&mut self.ego, "start") {
            Some(entry) => number(&entry)?,
            None => T::of(EGO_START),
        };
        let set_speed = take(&mut self.ego, "set_speed").map(|e| number(&e)).transpose()?;
        reject_unknown(&self.ego, "ego.")?;

        let flag = |table: &mut Table, key: &str| take(table, key).map(|e| boolean(&e)).transpose();
        let lane_change_required = flag(&mut self.expected, "lane_change_required")?.unwrap_or(false);
        let lane_change_forbidden = flag(&mut self.expected, "lane_change_forbidden")?.unwrap_or(false);
        let time_gap_band = match take(&mut self.expected, "time_gap_band") {
            Some(entry) => {
                let v = numbers::<T>(&entry, 2)?;
                Some((v[0], v[1]))
            }
            None => None,
        };
        let set_speed_tolerance = take(&mut self.expected, "set_speed_tolerance").map(|e| number(&e)).transpose()?;
        reject_unknown(&self.expected, "expected.")?;

        let mut agents = Vec::with_capacity(drafts.len());
        for (index, mut draft) in drafts.into_iter().enumerate() {
            let path = format!("agents[{index}].");
            let lane = integer(&required(&mut draft.table, &path, "lane")?)?;
            let initial_offset = number(&required(&mut draft.table, &path, "offset")?)?;
            let initial_speed = number(&required(&mut draft.table, &path, "speed")?)?;
            let heading = match take(&mut draft.table, "heading") {
                Some(entry) => Heading::from_int(integer(&entry)?)
                    .ok_or_else(|| ScenarioError::semantic(format!("{path}heading"), "must be 1 or -1"))?,
                None => Heading::Forward,
            };
            reject_unknown(&draft.table, &path)?;
            let phases =
                draft.phases.iter().map(|(words, line)| phase::<T>(words, *line)).collect::<Result<Vec<_>, _>>()?;
            agents.push(AgentScript {
                name: draft.name,
                initial_lane: lane,
                initial_offset,
                initial_speed,
                heading,
                phases,
            });
        }

        let spec = ScenarioSpec {
            id,
            description,
            mode,
            duration,
            road: RoadSpec { lane_count, lane_width, length, oncoming_strip },
            ego_lane,
            ego_speed,
            ego_start,
            set_speed,
            agents,
            expected: ExpectedOutcome {
                lane_change_required,
                lane_change_forbidden,
                time_gap_band,
                set_speed_tolerance,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_test_case, ACC_CASES, CAEM_CASES};
    use proptest::prelude::*;

    #[test]
    fn catalog_cases_round_trip() {
        for id in CAEM_CASES.iter().chain(ACC_CASES.iter()) {
            let spec = build_test_case::<f64>(id).unwrap();
            let text = serialize_scenario(&spec);
            let parsed = parse_scenario::<f64>(&text).unwrap();
            assert_eq!(parsed, spec, "{id}");
            assert_eq!(serialize_scenario(&parsed), text, "{id}");
        }
    }

    #[test]
    fn f32_specs_round_trip() {
        let spec = build_test_case::<f32>("TC5").unwrap();
        let parsed = parse_scenario::<f32>(&serialize_scenario(&spec)).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn ego_lane_out_of_range_is_a_semantic_error() {
        let text = serialize_scenario(&build_test_case::<f64>("TC2").unwrap())
            .replace("\n[ego]\nlane = 1", "\n[ego]\nlane = 5");
        match parse_scenario::<f64>(&text) {
            Err(ScenarioError::Semantic { field, .. }) => assert_eq!(field, "ego_lane"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_syntax_error_on_line_one() {
        for text in ["", "\n\n", "# only a comment\n"] {
            match parse_scenario::<f64>(text) {
                Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 1),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let text = "scenario X\nmode = caem\nduration = abc\n";
        assert_eq!(
            parse_scenario::<f64>(text),
            Err(ScenarioError::Syntax { line: 3, column: 12, message: "`abc` is not a finite number".into() })
        );
    }

    #[test]
    fn phases_without_agent_are_rejected() {
        let text = "scenario X\n[phases]\nhold 1\n";
        assert!(matches!(parse_scenario::<f64>(text), Err(ScenarioError::Syntax { line: 2, .. })));
    }

    #[test]
    fn missing_field_reports_path() {
        let text = "scenario X\nmode = caem\nduration = 5\ndescription = d\n[road]\nlane_count = 2\nlength = 100\n";
        assert_eq!(
            parse_scenario::<f64>(text),
            Err(ScenarioError::semantic("road.lane_width", "missing required field"))
        );
    }

    #[test]
    fn single_line_description_and_defaults() {
        let text = "scenario Mine\nmode = acc\nduration = 10\ndescription = Just a lead car.\n\n[road]\nlane_count = 2\nlane_width = 3.5\nlength = 500\n\n[ego]\nlane = 0\nspeed = 20\n\n[agent Lead]\nlane = 0\noffset = 30\nspeed = 18\n[phases]\nhold 10\n";
        let spec = parse_scenario::<f64>(text).unwrap();
        assert_eq!(spec.description, "Just a lead car.");
        assert_eq!(spec.ego_start, EGO_START);
        assert_eq!(spec.agents[0].heading, Heading::Forward);
        assert_eq!(spec.expected, ExpectedOutcome::none());
    }

    #[test]
    fn invalid_agent_lane_reports_field_path() {
        let text = "scenario Mine\nmode = acc\nduration = 10\ndescription = d\n[road]\nlane_count = 2\nlane_width = 3.5\nlength = 500\n[ego]\nlane = 0\nspeed = 20\n[agent Lead]\nlane = 4\noffset = 30\nspeed = 18\n[phases]\nhold 10\n";
        match parse_scenario::<f64>(text) {
            Err(ScenarioError::Semantic { field, .. }) => assert_eq!(field, "agents[0].lane"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn arbitrary_hold_scenarios_round_trip(
            lanes in 1usize..5,
            speed in 0.0f64..50.0,
            offset in -50.0f64..200.0,
            agent_speed in 0.0f64..50.0,
            hold in 0.1f64..30.0,
            rate in 0.1f64..9.0,
            description in "[A-Za-z0-9 ,.]{1,40}( [A-Za-z]{1,8}){0,3}",
        ) {
            prop_assume!(!description.trim().is_empty());
            let mut spec = build_test_case::<f64>("TC6").unwrap();
            spec.road.lane_count = lanes;
            spec.ego_lane = lanes - 1;
            spec.ego_speed = speed;
            spec.description = description;
            spec.agents.push(AgentScript {
                name: "A".into(),
                initial_lane: 0,
                initial_offset: offset,
                initial_speed: agent_speed,
                heading: Heading::Forward,
                phases: vec![Phase::Hold { duration: hold }, Phase::Decelerate { rate, floor_speed: 0.0 }],
            });
            let text = serialize_scenario(&spec);
            let parsed = parse_scenario::<f64>(&text).unwrap();
            prop_assert_eq!(&parsed, &spec);
            prop_assert_eq!(serialize_scenario(&parsed), text);
        }
    }
}
