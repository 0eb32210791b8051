//! Generic finite-state-machine executive: explicit states, guarded
//! transitions evaluated in priority order (at most one fires per tick),
//! per-state timers, an audit event log, and DOT export.

use std::fmt::Debug;

/// A guarded edge. Lower priority values are evaluated first.
#[derive(Debug, Clone)]
pub struct Transition<S> {
    pub from: S,
    pub to: S,
    pub guard: &'static str,
    pub priority: u32,
}

impl<S> Transition<S> {
    pub fn new(from: S, to: S, guard: &'static str, priority: u32) -> Self {
        Transition { from, to, guard, priority }
    }
}

/// Audit record: one line per fired transition or domain event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub mission: String,
    pub from: String,
    pub to: String,
    pub guard: String,
    pub details: String,
}

impl Event {
    /// CSV row with the fixed column order (t, mission, from, to, guard,
    /// details). Commas inside fields are replaced to keep the format
    /// single-line splittable.
    pub fn to_csv_row(&self) -> String {
        let clean = |s: &str| s.replace(',', ";");
        format!(
            "{:.3},{},{},{},{},{}",
            self.t,
            clean(&self.mission),
            clean(&self.from),
            clean(&self.to),
            clean(&self.guard),
            clean(&self.details)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Machine<S: Copy + Eq + Debug> {
    mission: &'static str,
    transitions: Vec<Transition<S>>,
    state: S,
    entered_at: f64,
    events: Vec<Event>,
}

impl<S: Copy + Eq + Debug> Machine<S> {
    /// Build the machine, sorting transitions by priority (stable, so
    /// declaration order breaks ties). Panics at construction when a
    /// non-terminal state (one that appears as a source or destination
    /// but is not in `terminal`) has no outgoing transitions: dead ends
    /// are a construction error, not a runtime one.
    pub fn new(
        mission: &'static str,
        initial: S,
        mut transitions: Vec<Transition<S>>,
        terminal: &[S],
    ) -> Self {
        transitions.sort_by_key(|t| t.priority);
        let mut states: Vec<S> = vec![initial];
        for t in &transitions {
            if !states.contains(&t.from) {
                states.push(t.from);
            }
            if !states.contains(&t.to) {
                states.push(t.to);
            }
        }
        for s in &states {
            let has_exit = transitions.iter().any(|t| t.from == *s);
            assert!(
                has_exit || terminal.contains(s),
                "{mission}: state {s:?} is an unguarded dead end"
            );
        }
        Machine { mission, transitions, state: initial, entered_at: 0.0, events: Vec::new() }
    }

    pub fn state(&self) -> S {
        self.state
    }

    pub fn time_in_state(&self, now: f64) -> f64 {
        now - self.entered_at
    }

    /// Evaluate the current state's outgoing guards in priority order and
    /// fire the first that holds. Returns the new state if a transition
    /// fired.
    pub fn tick(&mut self, now: f64, mut guard_eval: impl FnMut(&'static str) -> bool) -> Option<S> {
        let fired = self
            .transitions
            .iter()
            .find(|t| t.from == self.state && guard_eval(t.guard))
            .cloned();
        if let Some(t) = fired {
            self.fire(now, t.to, t.guard, String::new());
            return Some(t.to);
        }
        None
    }

    /// Force a transition outside the guard table (terminal safety
    /// events). Logged like any other transition.
    pub fn force(&mut self, now: f64, to: S, guard: &'static str, details: String) {
        self.fire(now, to, guard, details);
    }

    fn fire(&mut self, now: f64, to: S, guard: &'static str, details: String) {
        self.events.push(Event {
            t: now,
            mission: self.mission.to_string(),
            from: format!("{:?}", self.state),
            to: format!("{to:?}"),
            guard: guard.to_string(),
            details,
        });
        self.state = to;
        self.entered_at = now;
    }

    /// Record a domain occurrence (pop, catch, attach, ...) without
    /// changing state; from == to in the log.
    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        self.events.push(Event {
            t: now,
            mission: self.mission.to_string(),
            from: format!("{:?}", self.state),
            to: format!("{:?}", self.state),
            guard: kind.to_string(),
            details,
        });
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    /// Graphviz DOT text of the transition table.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("digraph {} {{\n", self.mission));
        out.push_str("  rankdir=TB;\n  node [shape=box];\n");
        for t in &self.transitions {
            out.push_str(&format!(
                "  \"{:?}\" -> \"{:?}\" [label=\"{}\"];\n",
                t.from, t.to, t.guard
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Replay a transition log from an initial state name: returns the final
/// state name, verifying the chain is contiguous.
pub fn replay_final_state(initial: &str, events: &[Event]) -> Result<String, String> {
    let mut state = initial.to_string();
    for e in events {
        if e.from == e.to {
            continue; // domain note
        }
        if e.from != state {
            return Err(format!("event at t={} leaves {} but machine was in {}", e.t, e.from, state));
        }
        state = e.to.clone();
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    enum Demo {
        A,
        B,
        C,
    }

    fn demo_machine() -> Machine<Demo> {
        Machine::new(
            "demo",
            Demo::A,
            vec![
                Transition::new(Demo::A, Demo::C, "abort", 0),
                Transition::new(Demo::A, Demo::B, "go", 10),
                Transition::new(Demo::B, Demo::C, "finish", 10),
            ],
            &[Demo::C],
        )
    }

    #[test]
    fn priority_order_fires_first_true_guard() {
        let mut m = demo_machine();
        // both "abort" and "go" true: priority 0 wins
        let next = m.tick(1.0, |_| true);
        assert_eq!(next, Some(Demo::C));
        assert_eq!(m.state(), Demo::C);

        let mut m = demo_machine();
        let next = m.tick(1.0, |g| g == "go");
        assert_eq!(next, Some(Demo::B));
    }

    #[test]
    fn at_most_one_transition_per_tick() {
        let mut m = demo_machine();
        m.tick(0.5, |_| true);
        assert_eq!(m.drain_events().len(), 1);
    }

    #[test]
    #[should_panic(expected = "dead end")]
    fn dead_end_states_rejected_at_construction() {
        // B has no exit and is not terminal
        let _ = Machine::new(
            "bad",
            Demo::A,
            vec![Transition::new(Demo::A, Demo::B, "go", 0)],
            &[],
        );
    }

    #[test]
    fn events_replay_to_final_state() {
        let mut m = demo_machine();
        m.tick(0.1, |g| g == "go");
        m.note(0.2, "domain_thing", "x=1".into());
        m.tick(0.3, |g| g == "finish");
        let events = m.drain_events();
        assert_eq!(events.len(), 3);
        let replayed = replay_final_state("A", &events).unwrap();
        assert_eq!(replayed, format!("{:?}", m.state()));
    }

    #[test]
    fn timers_track_state_entry() {
        let mut m = demo_machine();
        assert_eq!(m.time_in_state(2.0), 2.0);
        m.tick(2.0, |g| g == "go");
        assert_eq!(m.time_in_state(3.5), 1.5);
    }

    #[test]
    fn dot_export_lists_all_edges() {
        let m = demo_machine();
        let dot = m.to_dot();
        assert!(dot.contains("\"A\" -> \"B\" [label=\"go\"]"));
        assert!(dot.contains("\"B\" -> \"C\" [label=\"finish\"]"));
        assert!(dot.starts_with("digraph demo {"));
    }
}
