//! Knuth's Algorithm X over dancing links.
//!
//! Nodes live in one flat vector. Index 0 is the root header, indices
//! `1..=columns` are column headers, everything after is a row node.

#[derive(Clone, Copy, Debug)]
struct Node {
    left: usize,
    right: usize,
    up: usize,
    down: usize,
    column: usize,
    row: usize,
}

/// A sparse 0/1 matrix for exact-cover search.
#[derive(Clone, Debug)]
pub struct ExactCover {
    nodes: Vec<Node>,
    sizes: Vec<usize>,
    rows: usize,
}

const ROOT: usize = 0;

impl ExactCover {
    pub fn new(columns: usize) -> Self {
        let mut nodes = Vec::with_capacity(1 + columns * 8);
        for i in 0..=columns {
            nodes.push(Node {
                left: if i == 0 { columns } else { i - 1 },
                right: if i == columns { 0 } else { i + 1 },
                up: i,
                down: i,
                column: i,
                row: usize::MAX,
            });
        }
        ExactCover {
            nodes,
            sizes: vec![0; columns + 1],
            rows: 0,
        }
    }

    pub fn columns(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Appends a row covering `columns` (0-based, each < `self.columns()`).
    /// Returns the row id.
    pub fn add_row(&mut self, columns: &[usize]) -> usize {
        let row = self.rows;
        self.rows += 1;
        let first = self.nodes.len();
        for (k, &c) in columns.iter().enumerate() {
            let col = c + 1;
            assert!(col < self.sizes.len(), "column {c} out of range");
            let id = self.nodes.len();
            let up = self.nodes[col].up;
            self.nodes.push(Node {
                left: if k == 0 { id } else { id - 1 },
                right: first,
                up,
                down: col,
                column: col,
                row,
            });
            self.nodes[up].down = id;
            self.nodes[col].up = id;
            if k > 0 {
                self.nodes[id - 1].right = id;
            }
            self.nodes[first].left = id;
            self.sizes[col] += 1;
        }
        row
    }

    fn cover(&mut self, col: usize) {
        let Node { left, right, .. } = self.nodes[col];
        self.nodes[left].right = right;
        self.nodes[right].left = left;
        let mut i = self.nodes[col].down;
        while i != col {
            let mut j = self.nodes[i].right;
            while j != i {
                let Node { up, down, column, .. } = self.nodes[j];
                self.nodes[up].down = down;
                self.nodes[down].up = up;
                self.sizes[column] -= 1;
                j = self.nodes[j].right;
            }
            i = self.nodes[i].down;
        }
    }

    fn uncover(&mut self, col: usize) {
        let mut i = self.nodes[col].up;
        while i != col {
            let mut j = self.nodes[i].left;
            while j != i {
                let Node { up, down, column, .. } = self.nodes[j];
                self.sizes[column] += 1;
                self.nodes[up].down = j;
                self.nodes[down].up = j;
                j = self.nodes[j].left;
            }
            i = self.nodes[i].up;
        }
        let Node { left, right, .. } = self.nodes[col];
        self.nodes[left].right = col;
        self.nodes[right].left = col;
    }

    /// Visits every exact cover as a list of row ids. The visitor returns
    /// `false` to stop the search early.
    pub fn for_each_solution<F: FnMut(&[usize]) -> bool>(&mut self, mut visit: F) {
        let mut partial = Vec::new();
        self.search(&mut partial, &mut visit);
    }

    fn search<F: FnMut(&[usize]) -> bool>(&mut self, partial: &mut Vec<usize>, visit: &mut F) -> bool {
        if self.nodes[ROOT].right == ROOT {
            return visit(partial);
        }
        // Smallest column first.
        let mut col = self.nodes[ROOT].right;
        let mut best = col;
        while col != ROOT {
            if self.sizes[col] < self.sizes[best] {
                best = col;
            }
            col = self.nodes[col].right;
        }
        if self.sizes[best] == 0 {
            return true;
        }
        self.cover(best);
        let mut r = self.nodes[best].down;
        let mut keep_going = true;
        while r != best && keep_going {
            partial.push(self.nodes[r].row);
            let mut j = self.nodes[r].right;
            while j != r {
                self.cover(self.nodes[j].column);
                j = self.nodes[j].right;
            }
            keep_going = self.search(partial, visit);
            let mut j = self.nodes[r].left;
            while j != r {
                self.uncover(self.nodes[j].column);
                j = self.nodes[j].left;
            }
            partial.pop();
            r = self.nodes[r].down;
        }
        self.uncover(best);
        keep_going
    }

    pub fn solutions(&mut self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.for_each_solution(|rows| {
            let mut rows = rows.to_vec();
            rows.sort_unstable();
            out.push(rows);
            true
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knuth_example() {
        // The 6x7 example from "Dancing Links".
        let mut m = ExactCover::new(7);
        m.add_row(&[2, 4, 5]);
        m.add_row(&[0, 3, 6]);
        m.add_row(&[1, 2, 5]);
        m.add_row(&[0, 3]);
        m.add_row(&[1, 6]);
        m.add_row(&[3, 4, 6]);
        assert_eq!(m.solutions(), vec![vec![0, 3, 4]]);
        // Search restores the matrix.
        assert_eq!(m.solutions(), vec![vec![0, 3, 4]]);
    }

    #[test]
    fn counts_all_covers() {
        // Every subset of {0,1,2} as a row: covers = set partitions = Bell(3).
        let mut m = ExactCover::new(3);
        for mask in 1u32..8 {
            let cols: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
            m.add_row(&cols);
        }
        assert_eq!(m.solutions().len(), 5);
    }

    #[test]
    fn no_cover() {
        let mut m = ExactCover::new(2);
        m.add_row(&[0]);
        assert!(m.solutions().is_empty());
    }

    #[test]
    fn early_stop() {
        let mut m = ExactCover::new(4);
        for mask in 1u32..16 {
            let cols: Vec<usize> = (0..4).filter(|i| mask >> i & 1 == 1).collect();
            m.add_row(&cols);
        }
        let mut seen = 0;
        m.for_each_solution(|_| {
            seen += 1;
            seen < 3
        });
        assert_eq!(seen, 3);
        assert_eq!(m.solutions().len(), 15);
    }
}
