#include "cli.hpp"

int main(int argc, char** argv) { return gestura::cli::run(argc, argv); }
