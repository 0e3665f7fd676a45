//! Library surface of the `price` binary: config parsing, the experiment
//! runner and the benchmark cache, kept callable so integration tests can
//! drive table runs in-process.

pub mod cache;
pub mod config;
pub mod table;

/// Shipped experiment configurations reproducing the reference tables.
/// Table 4 splits into two parameter sets (short- and long-dated blocks).
pub mod builtin {
    pub const TABLE1: &str = include_str!("../../../configs/table1.conf");
    pub const TABLE2: &str = include_str!("../../../configs/table2.conf");
    pub const TABLE3: &str = include_str!("../../../configs/table3.conf");
    pub const TABLE4_LONG: &str = include_str!("../../../configs/table4_long.conf");
    pub const TABLE4_SHORT: &str = include_str!("../../../configs/table4_short.conf");

    /// Config texts for `bench --table N`, in execution order.
    pub fn for_table(table: u8) -> Option<Vec<&'static str>> {
        match table {
            1 => Some(vec![TABLE1]),
            2 => Some(vec![TABLE2]),
            3 => Some(vec![TABLE3]),
            4 => Some(vec![TABLE4_LONG, TABLE4_SHORT]),
            _ => None,
        }
    }
}
