pub const CSV_HEADER: &str = "epoch,train_rel_l2,test_rel_l2,lr,seconds";

/// Metrics of one completed epoch (epochs count from 1).
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_rel_l2: f64,
    pub test_rel_l2: f64,
    pub lr: f64,
    pub seconds: f64,
}

impl EpochRecord {
    /// Floats use the shortest round-trip representation.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:.3}",
            self.epoch, self.train_rel_l2, self.test_rel_l2, self.lr, self.seconds
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricHistory {
    records: Vec<EpochRecord>,
}

impl MetricHistory {
    /// Appends a record; epochs must increase.
    pub fn push(&mut self, record: EpochRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.epoch > last.epoch, "epoch {} after {}", record.epoch, last.epoch);
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}
