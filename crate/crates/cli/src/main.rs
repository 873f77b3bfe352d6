fn main() -> anyhow::Result<()> {
    anubis_cli::main_entry()
}
