use clap::Parser;

fn main() {
    // no environment lookups: warnings only
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = twabs::Cli::parse();
    std::process::exit(twabs::run(&cli));
}
