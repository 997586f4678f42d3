#include "pjfit/cli.hpp"

int main(int argc, char** argv) { return pjfit::run_cli(argc, argv); }
