use std::collections::HashMap;

use crate::model::{Symbol, Term};

/// Invents labelled nulls as a function of (rule, existential variable,
/// frontier image). The same key always yields the same null; fresh keys get
/// consecutive ids starting at 1.
#[derive(Clone, Debug, Default)]
pub struct NullFactory {
    ids: HashMap<(Symbol, Symbol, Vec<Term>), u64>,
    next: u64,
}

impl NullFactory {
    pub fn new() -> Self {
        NullFactory {
            ids: HashMap::new(),
            next: 1,
        }
    }

    pub fn fresh(&mut self, rule: &Symbol, var: &Symbol, frontier_image: &[Term]) -> Term {
        debug_assert!(frontier_image.iter().all(|t| !t.is_variable()));
        let key = (rule.clone(), var.clone(), frontier_image.to_vec());
        let next = &mut self.next;
        let id = *self.ids.entry(key).or_insert_with(|| {
            let id = (*next).max(1);
            *next = id + 1;
            id
        });
        Term::null(id)
    }

    pub fn issued(&self) -> usize {
        self.ids.len()
    }
}
