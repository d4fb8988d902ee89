// Regenerate the single- versus multi-class comparison as CSV.

use strag_core::cli::{cmd_table, write_table_csv, TableId, TableOptions, TableRow};
use strag_core::Result;

fn run_example() -> Result<Vec<TableRow>> {
    let rows = cmd_table(TableId::III, &TableOptions::default())?;
    write_table_csv(std::io::stdout(), &rows)?;
    Ok(rows)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
