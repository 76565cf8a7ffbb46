package org.example.sip;

import android.os.PowerManager;

public class ReacquireBalanced {
    private PowerManager.WakeLock wakeLock;

    void twoBursts() {
        wakeLock.acquire();
        sync();
        wakeLock.release();
        wakeLock.acquire();
        try {
            sync();
        } finally {
            wakeLock.release();
        }
    }
}
