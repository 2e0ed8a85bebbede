//! FIFO holding area for requests awaiting admission. Never reorders: the
//! head blocks until the controller has budget for it.

use std::collections::{HashSet, VecDeque};

use crate::admission::AdmissionController;
use crate::engine::SimTime;
use crate::error::SimError;
use crate::workload::Request;

#[derive(Debug, Default)]
pub struct Frontend {
    pending: VecDeque<Request>,
    seen: HashSet<u64>,
}

impl Frontend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_cost(&self) -> u64 {
        self.pending.iter().map(|r| r.cost).sum()
    }

    /// Append an arriving request. The caller must attempt a drain
    /// immediately afterwards.
    pub fn on_arrival(&mut self, r: Request, _now: SimTime) -> Result<(), SimError> {
        if !self.seen.insert(r.id) {
            return Err(SimError::DuplicateRequest(r.id));
        }
        self.pending.push_back(r);
        Ok(())
    }

    /// Pop and admit pending requests in FIFO order while the controller
    /// accepts the head. Each admitted request is stamped and handed to
    /// `sink` after `on_submit` is charged. Returns the admitted count.
    pub fn drain<F>(
        &mut self,
        now: SimTime,
        controller: &mut dyn AdmissionController,
        mut sink: F,
    ) -> u64
    where
        F: FnMut(Request),
    {
        let mut admitted = 0;
        while let Some(head) = self.pending.front() {
            if !controller.can_admit(head.cost) {
                break;
            }
            let mut r = self.pending.pop_front().unwrap();
            r.t_admitted = Some(now);
            controller.on_submit(r.cost, now);
            sink(r);
            admitted += 1;
        }
        admitted
    }
}
