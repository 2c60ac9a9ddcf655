#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>

#include "implet/error.hpp"

namespace implet {

/// A child process running `/bin/sh -c command` with its standard input and
/// output connected to pipes. Line-oriented I/O with a per-read timeout.
class Subprocess {
public:
    explicit Subprocess(const std::string& command) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0) throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
        }
        pid_ = ::fork();
        if (pid_ < 0) throw ProtocolError(std::string("fork failed: ") + std::strerror(errno));
        if (pid_ == 0) {
            ::setpgid(0, 0);
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::setpgid(pid_, pid_);
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
        // A dead child must surface as a write error, not SIGPIPE.
        ::signal(SIGPIPE, SIG_IGN);
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess() {
        if (in_fd_ >= 0) ::close(in_fd_);
        if (out_fd_ >= 0) ::close(out_fd_);
        if (pid_ > 0) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == 0) {
                ::kill(-pid_, SIGTERM);
                ::waitpid(pid_, &status, 0);
            }
        }
    }

    void write_line(const std::string& line) {
        std::string data = line + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            ssize_t n = ::write(in_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("write to model process failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    /// Reads one line (without the newline). Throws ProtocolError on EOF or timeout.
    std::string read_line(std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (true) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) throw ProtocolError("timed out waiting for model process response");
            pollfd pfd{out_fd_, POLLIN, 0};
            int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) continue;
            char chunk[4096];
            ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("read from model process failed: ") + std::strerror(errno));
            }
            if (n == 0) throw ProtocolError("model process closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    std::string buffer_;
};

}  // namespace implet
