use cvdiscord_cli::config::EnvOverrides;

fn main() {
    let code = cvdiscord_cli::run(std::env::args_os(), &EnvOverrides::from_env());
    std::process::exit(code);
}
