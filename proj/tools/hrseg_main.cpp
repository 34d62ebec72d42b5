#include "hrseg_cli.hpp"

int main(int argc, char** argv) { return hrseg::cli::run(argc, argv); }
