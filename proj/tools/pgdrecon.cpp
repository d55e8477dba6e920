#include "pgdrecon/cli.hpp"

int main(int argc, char** argv) { return pgdrecon::cli::run(argc, argv); }
