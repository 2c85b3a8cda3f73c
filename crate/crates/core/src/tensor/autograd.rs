use std::cell::Cell;
use std::collections::{HashMap, HashSet};

use super::Tensor;

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Whether operations on this thread currently record graph nodes.
pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Disables graph recording until dropped.
pub struct NoGradGuard {
    previous: bool,
}

impl NoGradGuard {
    pub fn new() -> Self {
        let previous = GRAD_ENABLED.with(|g| g.replace(false));
        NoGradGuard { previous }
    }
}

impl Default for NoGradGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        let previous = self.previous;
        GRAD_ENABLED.with(|g| g.set(previous));
    }
}

/// Runs `f` with graph recording disabled.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let _guard = NoGradGuard::new();
    f()
}

/// The tracked operations reachable from a root, in topological order
/// (every tensor appears after all of its inputs).
pub struct GradTape {
    order: Vec<Tensor>,
}

impl GradTape {
    /// Collects every tracked tensor the root depends on.
    pub fn record(root: &Tensor) -> GradTape {
        let mut order = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        // Iterative post-order DFS; graphs can be thousands of nodes deep.
        let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !t.is_tracked() || visited.contains(&t.id()) {
                continue;
            }
            visited.insert(t.id());
            stack.push((t.clone(), true));
            if let Some(node) = t.node() {
                for input in node.inputs.iter().rev() {
                    if input.is_tracked() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        GradTape { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Operation names in replay (reverse topological) order; leaves report `"leaf"`.
    pub fn replay_order(&self) -> Vec<&'static str> {
        self.order
            .iter()
            .rev()
            .map(|t| t.node().map_or("leaf", |n| n.op))
            .collect()
    }

    /// Propagates `seed` (dRoot/dRoot) backwards, visiting each node once.
    pub(crate) fn replay(&self, root: &Tensor, seed: Vec<f64>) {
        let mut grads: HashMap<u64, Vec<f64>> = HashMap::new();
        grads.insert(root.id(), seed);
        for t in self.order.iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            let Some(node) = t.node() else {
                t.accumulate_grad(&g);
                continue;
            };
            let needs: Vec<bool> = node.inputs.iter().map(|i| i.is_tracked()).collect();
            let input_grads = (node.backward)(&super::BackwardArgs {
                grad: &g,
                out: t.data(),
                needs: &needs,
            });
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", node.op);
            for (input, ig) in node.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !input.is_tracked() {
                    continue;
                }
                debug_assert_eq!(ig.len(), input.numel(), "{}", node.op);
                match grads.get_mut(&input.id()) {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&ig) {
                            *a += b;
                        }
                    }
                    None => {
                        grads.insert(input.id(), ig);
                    }
                }
            }
        }
    }
}
