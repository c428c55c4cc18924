#include "msgcoop/cli.hpp"

int main(int argc, char** argv) { return msgcoop::run_cli(argc, argv); }
