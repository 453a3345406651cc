//! Regenerates the bundled daily sample: `cargo run -p liqcast --example gen_sample -- data/xrp_usdt_daily_sample.csv`

use std::path::PathBuf;

fn main() -> liqcast::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/xrp_usdt_daily_sample.csv"));
    let series = liqcast::synthetic::xrp_like_daily(2018);
    let mut buf = Vec::new();
    liqcast::market_data::write_canonical_csv(&series, &mut buf)?;
    liqcast::fsutil::write_atomic(&out, &buf)?;
    eprintln!("wrote {} bars to {}", series.len(), out.display());
    Ok(())
}
