use std::io::{self, BufRead, Write};

use msrbot_core::{Bot, NowClock};

pub const PROMPT: &str = "> ";

/// Prompt/read/reply until `exit` or end of input.
pub fn run<R, W>(bot: &Bot, clock: impl Fn() -> NowClock, input: R, mut output: W) -> io::Result<()>
where
    R: BufRead,
    W: Write,
{
    let mut lines = input.lines();
    loop {
        write!(output, "{PROMPT}")?;
        output.flush()?;
        let Some(line) = lines.next() else {
            writeln!(output)?;
            return Ok(());
        };
        let line = line?;
        let utterance = line.trim();
        if utterance.is_empty() {
            continue;
        }
        if utterance.eq_ignore_ascii_case("exit") || utterance.eq_ignore_ascii_case("quit") {
            return Ok(());
        }
        let reply = bot.handle(utterance, clock());
        writeln!(output, "{}", reply.text)?;
    }
}
