use std::process::ExitCode;

use hypschwarz::acceptance;
use hypschwarz::quadrature::DEFAULT_ORDER;

fn main() -> ExitCode {
    let mut failed = 0;
    for criterion in acceptance::CRITERIA {
        let outcome = criterion(DEFAULT_ORDER);
        println!("{outcome}");
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", acceptance::CRITERIA.len() - failed, acceptance::CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
