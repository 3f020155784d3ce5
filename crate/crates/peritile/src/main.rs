fn main() {
    std::process::exit(peritile::run());
}
