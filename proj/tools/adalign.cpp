#include "adalign/cli.hpp"

int main(int argc, char** argv) { return adalign::cli::run(argc, argv); }
