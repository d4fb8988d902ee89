//! Bipartite matching between unknowns and received equations.

/// Maximum matching grown one equation at a time. Each new equation is
/// matched along an augmenting path if one exists; this keeps the matching
/// maximum after every insertion.
#[derive(Debug, Clone)]
pub struct IncrementalMatcher {
    num_unknowns: usize,
    adj: Vec<Vec<usize>>,
    unknown_match: Vec<Option<usize>>,
    size: usize,
}

impl IncrementalMatcher {
    pub fn new(num_unknowns: usize) -> Self {
        IncrementalMatcher { num_unknowns, adj: Vec::new(), unknown_match: vec![None; num_unknowns], size: 0 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_perfect(&self) -> bool {
        self.size == self.num_unknowns
    }

    /// Adds an equation touching `unknowns`; returns whether the matching grew.
    pub fn add(&mut self, unknowns: Vec<usize>) -> bool {
        let eq = self.adj.len();
        self.adj.push(unknowns);
        if self.is_perfect() {
            return false;
        }
        let mut visited = vec![false; self.num_unknowns];
        if self.augment(eq, &mut visited) {
            self.size += 1;
            true
        } else {
            false
        }
    }

    fn augment(&mut self, eq: usize, visited: &mut [bool]) -> bool {
        for k in 0..self.adj[eq].len() {
            let u = self.adj[eq][k];
            if visited[u] {
                continue;
            }
            visited[u] = true;
            let free = match self.unknown_match[u] {
                None => true,
                Some(other) => self.augment(other, visited),
            };
            if free {
                self.unknown_match[u] = Some(eq);
                return true;
            }
        }
        false
    }
}

/// Size of a maximum matching of the equations (given by their unknown lists).
pub fn max_matching(num_unknowns: usize, equations: &[Vec<usize>]) -> usize {
    let mut m = IncrementalMatcher::new(num_unknowns);
    for e in equations {
        m.add(e.clone());
    }
    m.size()
}
