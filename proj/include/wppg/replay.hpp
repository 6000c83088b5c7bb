#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wppg/numeric.hpp"

namespace wppg {

struct Transition {
    Vec s;
    Vec a;
    double r_ent = 0.0;  // env reward + tau * entropy estimate
    Vec s_next;
    bool done = false;
};

struct Batch {
    Mat s;
    Mat a;
    Vec r_ent;
    Mat s_next;
    std::vector<std::uint8_t> done;
    std::size_t size() const { return r_ent.size(); }
};

/// Fixed-capacity ring buffer with uniform sampling, stored column-wise.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
        : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
        s_.reserve(std::min<std::size_t>(capacity, 1 << 16) * state_dim);
    }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    void push(const Transition& t) {
        if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_)
            throw std::invalid_argument("ReplayBuffer::push: width mismatch");
        if (!std::isfinite(t.r_ent)) throw std::invalid_argument("ReplayBuffer::push: non-finite reward");
        if (size_ < capacity_) {
            s_.insert(s_.end(), t.s.begin(), t.s.end());
            a_.insert(a_.end(), t.a.begin(), t.a.end());
            snext_.insert(snext_.end(), t.s_next.begin(), t.s_next.end());
            r_.push_back(t.r_ent);
            done_.push_back(t.done ? 1 : 0);
            ++size_;
        } else {
            std::copy(t.s.begin(), t.s.end(), s_.begin() + head_ * state_dim_);
            std::copy(t.a.begin(), t.a.end(), a_.begin() + head_ * action_dim_);
            std::copy(t.s_next.begin(), t.s_next.end(), snext_.begin() + head_ * state_dim_);
            r_[head_] = t.r_ent;
            done_[head_] = t.done ? 1 : 0;
        }
        head_ = (head_ + 1) % capacity_;
    }

    Batch sample(std::size_t batch_size, Rng& rng) const {
        if (size_ < batch_size) throw std::logic_error("ReplayBuffer::sample: fewer stored transitions than batch size");
        Batch b;
        b.s = Mat(batch_size, state_dim_);
        b.a = Mat(batch_size, action_dim_);
        b.s_next = Mat(batch_size, state_dim_);
        b.r_ent.resize(batch_size);
        b.done.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            const std::size_t j = rng.index(size_);
            std::copy(s_.begin() + j * state_dim_, s_.begin() + (j + 1) * state_dim_, b.s.row(i));
            std::copy(a_.begin() + j * action_dim_, a_.begin() + (j + 1) * action_dim_, b.a.row(i));
            std::copy(snext_.begin() + j * state_dim_, snext_.begin() + (j + 1) * state_dim_, b.s_next.row(i));
            b.r_ent[i] = r_[j];
            b.done[i] = done_[j];
        }
        return b;
    }

private:
    std::size_t capacity_;
    std::size_t state_dim_;
    std::size_t action_dim_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;
    Vec s_, a_, snext_, r_;
    std::vector<std::uint8_t> done_;
};

}  // namespace wppg
