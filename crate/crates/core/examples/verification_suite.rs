//! A reduced verification suite with its reports written as CSV.
use hypobridge::verify::{run_suite, write_reports_csv, Suite, SuiteOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite: Suite = std::env::args().nth(1).as_deref().unwrap_or("baseline").parse()?;
    let opts = SuiteOptions {
        paths: 1000,
        ..SuiteOptions::default()
    };
    let reports = run_suite(suite, &opts)?;
    for r in &reports {
        println!("{r}");
    }
    let file = std::env::temp_dir().join("suite-reports.csv");
    write_reports_csv(std::fs::File::create(&file)?, &reports)?;
    println!("{} reports, {} passing, written to {}", reports.len(), reports.iter().filter(|r| r.pass).count(), file.display());
    Ok(())
}
