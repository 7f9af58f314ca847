#include "ridg/harness.hpp"

int main(int argc, char** argv) { return ridg::cli_main(argc, argv); }
