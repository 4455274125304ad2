//! Drive the command-line front end in-process: write a small dataset and a
//! model file, then run `verify`, `predict` and `variogram` on them.
//!
//! ```bash
//! cargo run -p blupkit --example command_line
//! ```
//!
//! The same commands are available from the `blupkit` binary.

use std::io;

fn main() -> io::Result<()> {
    let dir = std::env::temp_dir().join("blupkit-example");
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("data.csv");
    let model = dir.join("model.json");
    std::fs::write(
        &data,
        "x1,x2,y\n0.1,0.2,1.3\n0.9,0.1,2.0\n0.5,0.5,1.1\n0.2,0.8,0.4\n0.8,0.9,1.6\n0.4,0.3,1.2\n",
    )?;
    std::fs::write(
        &model,
        r#"{"kernel": {"family": "matern52", "variance": 0.5, "lengthscales": [0.5]},
 "mean": {"type": "constant_unknown"}, "noise_variance": 0.0, "variant": "ok"}"#,
    )?;
    let (d, m) = (data.to_str().unwrap(), model.to_str().unwrap());
    let mut out = io::stdout();
    let mut err = io::stderr();

    let commands: [Vec<&str>; 3] = [
        vec!["verify", "--data", d, "--config", m, "--grid", "0:1:4", "--grid", "0:1:4"],
        vec!["predict", "--data", d, "--config", m, "--grid", "0:1:3", "--grid", "0:1:3"],
        vec!["variogram", "--data", d, "--bins", "4", "--max-lag", "1.2", "--config", m],
    ];
    for args in commands {
        println!("$ blupkit {}", args.join(" "));
        let argv = std::iter::once("blupkit").chain(args.iter().copied());
        let code = blupkit::cli::run(argv, &mut out, &mut err);
        println!("(exit {code})\n");
    }
    Ok(())
}
